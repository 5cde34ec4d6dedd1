use std::collections::BTreeSet;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub const MAX_SPLIT_RETRIES: usize = 1000;

/// Disjoint train/test partition of background and chip asset ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub background_train: Vec<String>,
    pub background_test: Vec<String>,
    pub chip_train: Vec<String>,
    pub chip_test: Vec<String>,
    pub master_seed: u64,
}

impl SplitSpec {
    /// Disjointness of both asset kinds.
    pub fn is_disjoint(&self) -> bool {
        let disjoint = |a: &[String], b: &[String]| {
            let a: BTreeSet<&String> = a.iter().collect();
            b.iter().all(|x| !a.contains(x))
        };
        disjoint(&self.background_train, &self.background_test) && disjoint(&self.chip_train, &self.chip_test)
    }
}

/// Ids of a uniformly random `test_count`-subset and its complement, both in
/// input order.
fn partition(ids: &[String], test_count: usize, stream: &mut Stream) -> (Vec<String>, Vec<String>) {
    let mut is_test = vec![false; ids.len()];
    for i in sample(stream, ids.len(), test_count) {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (id, t) in ids.iter().zip(is_test) {
        if t {
            test.push(id.clone());
        } else {
            train.push(id.clone());
        }
    }
    (train, test)
}

/// Splits backgrounds and `(chip id, class)` pairs. Chip splits are redrawn
/// until every class appears on both sides.
pub fn make_split(
    backgrounds: &[String],
    chips: &[(String, String)],
    bg_test_count: usize,
    chip_test_count: usize,
    master_seed: u64,
    stream: &mut Stream,
) -> Result<SplitSpec> {
    if bg_test_count > 0 && bg_test_count >= backgrounds.len() {
        return Err(Error::config(format!(
            "background test count {bg_test_count} must be below the {} backgrounds",
            backgrounds.len()
        )));
    }
    if chip_test_count >= chips.len() {
        return Err(Error::config(format!(
            "chip test count {chip_test_count} must be below the {} chips",
            chips.len()
        )));
    }
    let classes: BTreeSet<&str> = chips.iter().map(|(_, c)| c.as_str()).collect();
    if chip_test_count < classes.len() || chips.len() - chip_test_count < classes.len() {
        return Err(Error::config(format!(
            "cannot represent {} classes on both sides of a {}/{} chip split",
            classes.len(),
            chips.len() - chip_test_count,
            chip_test_count
        )));
    }
    let (background_train, background_test) = partition(backgrounds, bg_test_count, stream);
    let ids: Vec<String> = chips.iter().map(|(id, _)| id.clone()).collect();
    for _ in 0..MAX_SPLIT_RETRIES {
        let mut is_test = vec![false; chips.len()];
        for i in sample(stream, chips.len(), chip_test_count) {
            is_test[i] = true;
        }
        let covered = |side: bool| {
            let seen: BTreeSet<&str> = chips
                .iter()
                .zip(&is_test)
                .filter(|(_, &t)| t == side)
                .map(|((_, c), _)| c.as_str())
                .collect();
            seen.len() == classes.len()
        };
        if covered(true) && covered(false) {
            let (mut chip_train, mut chip_test) = (Vec::new(), Vec::new());
            for (id, t) in ids.iter().zip(is_test) {
                if t {
                    chip_test.push(id.clone());
                } else {
                    chip_train.push(id.clone());
                }
            }
            return Ok(SplitSpec {
                background_train,
                background_test,
                chip_train,
                chip_test,
                master_seed,
            });
        }
    }
    Err(Error::config(format!(
        "no chip split covering every class on both sides after {MAX_SPLIT_RETRIES} draws"
    )))
}
