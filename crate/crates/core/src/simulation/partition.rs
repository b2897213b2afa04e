use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

pub const MIN_PATIENTS_PER_SUBSET: usize = 3;

/// Random partition into `k` disjoint subsets of at least `min_size` items.
///
/// Items are shuffled; every subset first receives `min_size` of them and
/// each leftover item joins a uniformly chosen subset. Subsets keep the
/// input order of their members.
pub fn partition_patients<T: Clone, R: Rng + ?Sized>(
    patients: &[T],
    k: usize,
    min_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<T>>> {
    let min_size = min_size.max(1);
    if k == 0 || patients.len() < k * min_size {
        return Err(Error::Partition {
            patients: patients.len(),
            subsets: k,
            min_size,
        });
    }
    let mut order: Vec<usize> = (0..patients.len()).collect();
    order.shuffle(rng);
    let mut owner = vec![0usize; patients.len()];
    for (pos, &item) in order.iter().enumerate() {
        owner[item] = if pos < k * min_size {
            pos / min_size
        } else {
            rng.random_range(0..k)
        };
    }
    let mut subsets = vec![Vec::new(); k];
    for (item, &s) in owner.iter().enumerate() {
        subsets[s].push(patients[item].clone());
    }
    Ok(subsets)
}
