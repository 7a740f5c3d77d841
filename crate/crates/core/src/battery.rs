//! Seeded random test observables.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{diag2, SiteMatrix, C64};
use crate::engine::Observable;
use crate::graph::{self, Vertex};

/// Entries uniform in `[-1, 1)`; diagonal and real when `diagonal` is set.
pub fn random_site_matrix<R: Rng>(rng: &mut R, diagonal: bool) -> SiteMatrix {
    if diagonal {
        return diag2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    SiteMatrix::new(z(), z(), z(), z())
}

/// A product observable on a random non-empty subset of the volume of
/// level `n`.
pub fn random_observable<R: Rng>(rng: &mut R, n: usize, diagonal: bool) -> Observable {
    let mut sites = graph::volume(n);
    sites.shuffle(rng);
    let count = rng.gen_range(1..=sites.len());
    let factors = sites[..count].iter().map(|v| (*v, random_site_matrix(rng, diagonal))).collect();
    Observable::new(factors).expect("sites are distinct")
}

/// Random product observable with one factor on each of `sites`.
pub fn random_product_on<R: Rng>(rng: &mut R, sites: &[Vertex], diagonal: bool) -> Observable {
    Observable::new(sites.iter().map(|v| (*v, random_site_matrix(rng, diagonal))).collect()).expect("sites are distinct")
}

/// `count` observables on the volume of level `n`, reproducible from `seed`.
pub fn battery(n: usize, count: usize, seed: u64, diagonal: bool) -> Vec<Observable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_observable(&mut rng, n, diagonal)).collect()
}
