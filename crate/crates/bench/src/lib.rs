//! Fixture builders shared by the benchmark targets.

use geneig::synth::SpectrumSpec;
use geneig::{generate_geneig, GeneigInstance, GeneigSpec, SparseSymmetricMatrix};

/// Dense planted pair with a single leading eigenvalue at relative gap `rho`.
pub fn planted_top1(d: usize, kappa_b: f64, rho: f64, seed: u64) -> GeneigInstance {
    generate_geneig(&GeneigSpec {
        d,
        spectrum: SpectrumSpec::Planted { k: 1, rho, gamma: 1.0 },
        kappa_b,
        seed,
    })
    .expect("planted instance")
}

/// Symmetric banded matrix in CSR form: `2·half_width + 1` on the diagonal,
/// -1 within the band. Diagonally dominant, hence positive definite.
pub fn banded_sparse(d: usize, half_width: usize) -> SparseSymmetricMatrix {
    let mut triplets = Vec::with_capacity(d * (2 * half_width + 1));
    for i in 0..d {
        triplets.push((i, i, 2.0 * half_width as f64 + 1.0));
        for off in 1..=half_width {
            if i + off < d {
                triplets.push((i, i + off, -1.0));
                triplets.push((i + off, i, -1.0));
            }
        }
    }
    SparseSymmetricMatrix::from_triplets(d, &triplets).expect("banded matrix")
}
