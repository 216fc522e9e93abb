//! Rejection-free event selection: cells are grouped into classes of equal
//! flip probability, classes are sampled by weight `|class| * p`, and every
//! kernel selection realizes a state change.
//!
//! The modified parallel form adds a fixed class of boundary cells whose
//! membership never changes; those cells are attempted with the standard
//! rule (weight `|boundary|`, flip with probability `p`), which shields the
//! kernels of neighboring subarrays from membership changes and thereby
//! avoids roll-backs.

use crate::error::{arg_err, Result};
use crate::models::Model;

/// The distinct flip-probability values a model can produce, ascending.
/// Combinations with equal probability share a class.
#[derive(Debug, Clone)]
pub struct ClassSet {
    probs: Vec<f64>,
}

impl ClassSet {
    pub fn for_model(model: &Model) -> ClassSet {
        let mut probs: Vec<f64> = match model {
            Model::Ising { table, .. } => table.entries().to_vec(),
            Model::Life => vec![0.0, 1.0],
        };
        probs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        probs.dedup();
        ClassSet { probs }
    }

    pub fn count(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, class: usize) -> f64 {
        self.probs[class]
    }

    /// The class holding probability `p`. Probabilities are produced by the
    /// same table lookups that built the set, so exact comparison is sound.
    pub fn class_of(&self, p: f64) -> usize {
        self.probs
            .binary_search_by(|x| x.partial_cmp(&p).unwrap())
            .expect("flip probability not present in class set")
    }
}

/// What a weighted selection returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// A fixed-class boundary cell: the state may or may not change.
    Boundary { slot: u32 },
    /// A tracked kernel cell: the state always changes.
    Kernel { class: u32, slot: u32 },
}

/// Class membership lists over one subarray, indexed by subarray-local cell
/// slots. Removal and insertion are O(1) via back-indices.
#[derive(Debug, Clone)]
pub struct ClassPartition {
    class_set: ClassSet,
    boundary: Vec<u32>,
    members: Vec<Vec<u32>>,
    class_of_slot: Vec<i32>, // -1 marks boundary slots
    pos_of_slot: Vec<u32>,
}

impl ClassPartition {
    /// `is_boundary` and `prob_of` are indexed by local slot.
    pub fn new(
        class_set: ClassSet,
        slots: usize,
        mut is_boundary: impl FnMut(usize) -> bool,
        mut prob_of: impl FnMut(usize) -> f64,
    ) -> ClassPartition {
        let mut part = ClassPartition {
            members: vec![Vec::new(); class_set.count()],
            class_set,
            boundary: Vec::new(),
            class_of_slot: vec![-1; slots],
            pos_of_slot: vec![0; slots],
        };
        for slot in 0..slots {
            if is_boundary(slot) {
                part.boundary.push(slot as u32);
            } else {
                let k = part.class_set.class_of(prob_of(slot));
                part.class_of_slot[slot] = k as i32;
                part.pos_of_slot[slot] = part.members[k].len() as u32;
                part.members[k].push(slot as u32);
            }
        }
        part
    }

    pub fn class_set(&self) -> &ClassSet {
        &self.class_set
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len()
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.members[class].len()
    }

    pub fn class_of_slot(&self, slot: usize) -> Option<usize> {
        let k = self.class_of_slot[slot];
        (k >= 0).then_some(k as usize)
    }

    /// `|boundary| + sum_k |class_k| * p_k`.
    pub fn total_weight(&self) -> f64 {
        let mut w = self.boundary.len() as f64;
        for (k, cells) in self.members.iter().enumerate() {
            w += cells.len() as f64 * self.class_set.prob(k);
        }
        w
    }

    /// Weighted class selection via `r1`, uniform cell within the class via
    /// `r2`. The boundary class comes first in enumeration order.
    pub fn select(&self, r1: f64, r2: f64) -> Selection {
        let w = self.total_weight();
        debug_assert!(w > 0.0, "selection from an all-frozen partition");
        let mut x = r1 * w;
        let nb = self.boundary.len();
        if nb > 0 && x < nb as f64 {
            let i = ((r2 * nb as f64) as usize).min(nb - 1);
            return Selection::Boundary { slot: self.boundary[i] };
        }
        x -= nb as f64;
        let mut last_nonempty = None;
        for (k, cells) in self.members.iter().enumerate() {
            if cells.is_empty() {
                continue;
            }
            last_nonempty = Some(k);
            let wk = cells.len() as f64 * self.class_set.prob(k);
            if x < wk {
                let i = ((r2 * cells.len() as f64) as usize).min(cells.len() - 1);
                return Selection::Kernel { class: k as u32, slot: cells[i] };
            }
            x -= wk;
        }
        // r1 rounding landed past the final cumulative weight.
        let k = last_nonempty.expect("positive weight implies a nonempty class");
        let cells = &self.members[k];
        let i = ((r2 * cells.len() as f64) as usize).min(cells.len() - 1);
        Selection::Kernel { class: k as u32, slot: cells[i] }
    }

    /// Moves a tracked cell to the class holding `p`. Boundary slots are
    /// never moved.
    pub fn reclassify(&mut self, slot: usize, p: f64) {
        let old = self.class_of_slot[slot];
        debug_assert!(old >= 0, "boundary membership is fixed");
        let new = self.class_set.class_of(p);
        if old as usize == new {
            return;
        }
        let pos = self.pos_of_slot[slot] as usize;
        let list = &mut self.members[old as usize];
        list.swap_remove(pos);
        if pos < list.len() {
            self.pos_of_slot[list[pos] as usize] = pos as u32;
        }
        self.class_of_slot[slot] = new as i32;
        self.pos_of_slot[slot] = self.members[new].len() as u32;
        self.members[new].push(slot as u32);
    }

    /// Recomputes every tracked cell's class and compares with the stored
    /// membership; also checks back-index consistency.
    pub fn audit(&self, mut prob_of: impl FnMut(usize) -> f64) -> std::result::Result<(), String> {
        for (k, cells) in self.members.iter().enumerate() {
            for (pos, &slot) in cells.iter().enumerate() {
                if self.class_of_slot[slot as usize] != k as i32 {
                    return Err(format!("slot {slot} listed in class {k} but tagged otherwise"));
                }
                if self.pos_of_slot[slot as usize] as usize != pos {
                    return Err(format!("slot {slot} back-index out of date"));
                }
            }
        }
        for slot in 0..self.class_of_slot.len() {
            let stored = self.class_of_slot[slot];
            if stored < 0 {
                continue;
            }
            let expect = self.class_set.class_of(prob_of(slot));
            if stored as usize != expect {
                return Err(format!(
                    "slot {slot} stored in class {stored} but current states give {expect}"
                ));
            }
        }
        Ok(())
    }
}

/// Time advance of the weighted event process: `t - ln(r)/(rate * weight)`.
pub fn advance_time(t: f64, rate: f64, weight: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return arg_err(format!("uniform draw must lie strictly in (0,1) (got {r})"));
    }
    if !weight.is_finite() || weight <= 0.0 {
        return arg_err("total class weight must be positive");
    }
    Ok(t - r.ln() / (rate * weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IsingParams, Model};

    fn ising2d(field: f64) -> Model {
        Model::ising(2, IsingParams { coupling: 1.0, field, temperature: 1.0 }).unwrap()
    }

    #[test]
    fn zero_field_collapses_to_five_classes() {
        // p depends only on s*sum when H = 0: 10 combos, 5 distinct values.
        let set = ClassSet::for_model(&ising2d(0.0));
        assert_eq!(set.count(), 5);
        let set = ClassSet::for_model(&ising2d(0.3));
        assert_eq!(set.count(), 10);
    }

    #[test]
    fn equal_probability_combos_share_a_class() {
        let model = ising2d(0.0);
        let set = ClassSet::for_model(&model);
        let p_plus = model.flip_probability(1, &[1, 1, -1, -1]);
        let p_minus = model.flip_probability(-1, &[1, 1, -1, -1]);
        assert_eq!(set.class_of(p_plus), set.class_of(p_minus));
    }

    #[test]
    fn life_has_two_classes() {
        let set = ClassSet::for_model(&Model::life());
        assert_eq!(set.count(), 2);
        assert_eq!(set.prob(0), 0.0);
        assert_eq!(set.prob(1), 1.0);
    }

    #[test]
    fn selection_weights() {
        // 44 boundary cells plus one class of 100 cells at p = 1/2:
        // P(boundary) = 44/94.
        let set = ClassSet { probs: vec![0.5] };
        let part = ClassPartition::new(set, 144, |s| s >= 100, |_| 0.5);
        assert_eq!(part.boundary_len(), 44);
        assert_eq!(part.class_len(0), 100);
        assert!((part.total_weight() - 94.0).abs() < 1e-12);
        let mut s = crate::streams::Stream::new(4, crate::streams::StreamId::scalar());
        let trials = 200_000;
        let mut hits = 0u64;
        for _ in 0..trials {
            if matches!(part.select(s.next_uniform(), s.next_uniform()), Selection::Boundary { .. })
            {
                hits += 1;
            }
        }
        let frac = hits as f64 / trials as f64;
        assert!((frac - 44.0 / 94.0).abs() < 0.005, "frac={frac}");
    }

    #[test]
    fn single_class_selected_with_certainty() {
        let set = ClassSet { probs: vec![0.25] };
        let part = ClassPartition::new(set, 10, |_| false, |_| 0.25);
        for r in [0.001, 0.5, 0.999] {
            assert!(matches!(part.select(r, 0.5), Selection::Kernel { class: 0, .. }));
        }
    }

    #[test]
    fn tiny_r1_selects_first_enumerated_class() {
        let set = ClassSet { probs: vec![0.1, 0.9] };
        let part = ClassPartition::new(set, 20, |s| s < 4, |s| if s < 12 { 0.1 } else { 0.9 });
        assert!(matches!(part.select(1e-15, 0.0), Selection::Boundary { .. }));
    }

    #[test]
    fn reclassify_moves_and_audits() {
        let model = ising2d(0.0);
        let set = ClassSet::for_model(&model);
        let mut probs = vec![set.prob(0); 9];
        let part_probs = probs.clone();
        let mut part = ClassPartition::new(set.clone(), 9, |_| false, |s| part_probs[s]);
        assert_eq!(part.class_len(0), 9);
        probs[4] = set.prob(3);
        part.reclassify(4, probs[4]);
        assert_eq!(part.class_len(0), 8);
        assert_eq!(part.class_len(3), 1);
        part.audit(|s| probs[s]).unwrap();
        probs[4] = set.prob(0);
        assert!(part.audit(|s| probs[s]).is_err());
    }

    #[test]
    fn advance_time_matches_cumulative_law() {
        // All p_k = 1 reduces to the plain cumulative Poisson stream.
        let t1 = advance_time(0.0, 1.0, 16.0, (-16.0f64).exp()).unwrap();
        let t2 = crate::arrival::cumulative_next_arrival(1.0, 16, 0.0, (-16.0f64).exp()).unwrap();
        assert!((t1 - t2).abs() < 1e-12);
        assert!(advance_time(0.0, 1.0, 0.0, 0.5).is_err());
        assert!(advance_time(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn advance_time_mean() {
        // Mean of Exp(rate * W) increments over many draws.
        let mut s = crate::streams::Stream::new(8, crate::streams::StreamId::scalar());
        let w = 16.0 * 3.3535013046647827e-4;
        let n = 100_000;
        let mut t = 0.0;
        for _ in 0..n {
            t = advance_time(t, 1.0, w, s.next_uniform()).unwrap();
        }
        let mean = t / n as f64;
        let expect = 1.0 / w;
        assert!((mean - expect).abs() < 3.0 * expect / (n as f64).sqrt(), "mean={mean}");
    }
}
