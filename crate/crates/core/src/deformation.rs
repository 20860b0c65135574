//! The family `G_k` and experiments along it.
//!
//! `G_k` has `m = 4`, `d2 = 3` and brackets
//! `[X_0, X_a] = Y_a` for `a = 1, 2, 3`,
//! `[X_1, X_2] = Y_3 / k`, `[X_1, X_3] = -Y_2 / k`, `[X_2, X_3] = Y_1 / k`
//! (indices of `X` zero-based, of `Y` one-based). The limit `k = inf` drops
//! the `1/k` terms and is the star-graph group on `K_{1,3}`.

use std::fmt;
use std::fmt::Write as _;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{GroupPoint, StructureConstants};
use crate::error::{CarnotError, Result};
use crate::filtration::{n0_search, N0SearchResult};
use crate::geodesics::{distance, DistanceEstimate, DistanceMethod, DistanceOptions};
use crate::jmaps::{metivier_check, MetivierStatus, MetivierVerdict};
use crate::rng::stream_rng;

pub const DEFAULT_K_LIST: [u64; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyIndex {
    Finite(u64),
    Infinite,
}

impl FamilyIndex {
    /// `1/k`, zero at infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            FamilyIndex::Finite(k) => 1.0 / k as f64,
            FamilyIndex::Infinite => 0.0,
        }
    }
}

impl fmt::Display for FamilyIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyIndex::Finite(k) => write!(f, "{k}"),
            FamilyIndex::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for FamilyIndex {
    type Err = CarnotError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(FamilyIndex::Infinite);
        }
        match s.parse::<u64>() {
            Ok(k) if k >= 1 => Ok(FamilyIndex::Finite(k)),
            _ => Err(CarnotError::Domain(format!("family index must be a positive integer or `inf`, got `{s}`"))),
        }
    }
}

/// Member `G_k` of the deformation family.
///
/// # Panics
/// Panics on `Finite(0)`.
pub fn gk_member(k: FamilyIndex) -> StructureConstants {
    assert!(k != FamilyIndex::Finite(0), "family index starts at 1");
    let r = k.reciprocal();
    let mut entries = vec![(0, 1, 0, 1.0), (0, 2, 1, 1.0), (0, 3, 2, 1.0)];
    if r != 0.0 {
        entries.extend([(1, 2, 2, r), (1, 3, 1, -r), (2, 3, 0, r)]);
    }
    StructureConstants::from_upper(4, 3, entries).expect("static constants")
}

#[derive(Clone)]
pub struct GroupFamily {
    pub name: String,
    pub generator: fn(FamilyIndex) -> StructureConstants,
}

impl GroupFamily {
    pub fn member(&self, k: FamilyIndex) -> StructureConstants {
        (self.generator)(k)
    }

    /// Largest entrywise gap between the structure constants of `G_k` and `G_inf`.
    pub fn structure_gap(&self, k: FamilyIndex) -> f64 {
        let a = self.member(k);
        let b = self.member(FamilyIndex::Infinite);
        (0..a.d2())
            .map(|l| (a.layer(l) - b.layer(l)).amax())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for GroupFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupFamily").field("name", &self.name).finish()
    }
}

pub fn gk_family() -> GroupFamily {
    GroupFamily {
        name: "G_k".into(),
        generator: gk_member,
    }
}

/// `count` seeded point pairs with coordinates uniform in `[0, 1]`.
pub fn unit_box_pairs(m: usize, d2: usize, count: usize, seed: u64) -> Vec<(GroupPoint, GroupPoint)> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut point = || {
                GroupPoint::new(
                    DVector::from_fn(m, |_, _| rng.random::<f64>()),
                    DVector::from_fn(d2, |_, _| rng.random::<f64>()),
                )
            };
            (point(), point())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCell {
    pub k: FamilyIndex,
    pub pair_id: usize,
    pub estimate: std::result::Result<DistanceEstimate, String>,
}

impl ConvergenceCell {
    pub fn value(&self) -> Option<f64> {
        self.estimate.as_ref().ok().map(DistanceEstimate::value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub k: u64,
    pub pair_id: usize,
    pub d_k: Option<f64>,
    pub d_inf: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub family: String,
    pub pairs: Vec<(GroupPoint, GroupPoint)>,
    pub k_list: Vec<u64>,
    pub cells: Vec<ConvergenceCell>,
    pub rows: Vec<ConvergenceRow>,
    /// `(k, max_pairs |d_k - d_inf|)`; `None` when some cell failed.
    pub max_gap: Vec<(u64, Option<f64>)>,
}

impl ConvergenceReport {
    /// Whether the max-gap column is non-increasing up to `slack`.
    pub fn monotone_within(&self, slack: f64) -> bool {
        let gaps: Option<Vec<f64>> = self.max_gap.iter().map(|(_, g)| *g).collect();
        gaps.is_some_and(|g| g.windows(2).all(|w| w[1] <= w[0] + slack))
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.estimate.is_err()).count()
    }
}

/// Distances `d_k(p, q)` for every pair and `k`, compared with `d_inf`.
pub fn convergence_report(
    family: &GroupFamily,
    pairs: &[(GroupPoint, GroupPoint)],
    k_list: &[u64],
    opts: &DistanceOptions,
) -> Result<ConvergenceReport> {
    if k_list.is_empty() || k_list.contains(&0) || k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CarnotError::Domain("k list must be nonempty, positive and increasing".into()));
    }
    let mut indices: Vec<FamilyIndex> = k_list.iter().map(|&k| FamilyIndex::Finite(k)).collect();
    indices.push(FamilyIndex::Infinite);
    let jobs: Vec<(FamilyIndex, usize)> = indices
        .iter()
        .flat_map(|&k| (0..pairs.len()).map(move |i| (k, i)))
        .collect();
    let cells: Vec<ConvergenceCell> = jobs
        .into_par_iter()
        .map(|(k, pair_id)| {
            let sc = family.member(k);
            let (p, q) = &pairs[pair_id];
            let estimate = distance(&sc, p, q, DistanceMethod::Both, opts).map_err(|e| e.to_string());
            ConvergenceCell { k, pair_id, estimate }
        })
        .collect();

    let limit: Vec<Option<f64>> = cells
        .iter()
        .filter(|c| c.k == FamilyIndex::Infinite)
        .map(ConvergenceCell::value)
        .collect();
    let mut rows = Vec::new();
    let mut max_gap = Vec::new();
    for &k in k_list {
        let mut worst = Some(0.0f64);
        for cell in cells.iter().filter(|c| c.k == FamilyIndex::Finite(k)) {
            let d_k = cell.value();
            let d_inf = limit[cell.pair_id];
            let gap = d_k.zip(d_inf).map(|(a, b)| (a - b).abs());
            worst = worst.zip(gap).map(|(w, g)| w.max(g));
            rows.push(ConvergenceRow {
                k,
                pair_id: cell.pair_id,
                d_k,
                d_inf,
                gap,
            });
        }
        max_gap.push((k, worst));
    }
    Ok(ConvergenceReport {
        family: family.name.clone(),
        pairs: pairs.to_vec(),
        k_list: k_list.to_vec(),
        cells,
        rows,
        max_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberSummary {
    pub k: FamilyIndex,
    pub verdict: MetivierVerdict,
    pub n0: N0SearchResult,
    /// `2Q - n = m + 3 d2`.
    pub lemma_value: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemicontinuityReport {
    pub family: String,
    pub budget: usize,
    pub seed: u64,
    pub members: Vec<MemberSummary>,
    /// Mismatches with the expected pattern; empty when it holds.
    pub mismatches: Vec<String>,
    pub liminf_finite: u64,
    pub limit_value: u64,
    pub rendered: String,
}

impl SemicontinuityReport {
    pub fn pattern_holds(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// The report as an error when the pattern fails.
    pub fn check(&self) -> Result<()> {
        if self.pattern_holds() {
            Ok(())
        } else {
            Err(CarnotError::Numerical(format!(
                "semicontinuity pattern failed:\n{}\n{}",
                self.mismatches.join("\n"),
                self.rendered
            )))
        }
    }
}

/// Métivier verdicts and `N_0` searches for each `k` in the default list and
/// the limit; checks that finite members are Métivier with `N_0 = 2Q - n`
/// and that the limit is not Métivier with a strictly larger `N_0`.
pub fn semicontinuity_experiment(family: &GroupFamily, budget: usize, seed: u64) -> Result<SemicontinuityReport> {
    semicontinuity_with(family, &DEFAULT_K_LIST, budget, seed)
}

pub fn semicontinuity_with(
    family: &GroupFamily,
    k_list: &[u64],
    budget: usize,
    seed: u64,
) -> Result<SemicontinuityReport> {
    if k_list.is_empty() {
        return Err(CarnotError::Domain("k list must be nonempty".into()));
    }
    let mut indices: Vec<FamilyIndex> = k_list.iter().map(|&k| FamilyIndex::Finite(k)).collect();
    indices.push(FamilyIndex::Infinite);
    let members = indices
        .into_iter()
        .map(|k| {
            let sc = family.member(k);
            let (n, q) = sc.dims();
            Ok(MemberSummary {
                k,
                verdict: metivier_check(&sc, budget, seed)?,
                n0: n0_search(&sc, budget, seed)?,
                lemma_value: (2 * q - n) as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (finite, limit) = members.split_at(members.len() - 1);
    let limit = &limit[0];
    let mut mismatches = Vec::new();
    for m in finite {
        if m.verdict.status != MetivierStatus::Metivier {
            mismatches.push(format!("k = {}: expected Metivier, got {}", m.k, m.verdict.status));
        }
        if m.n0.best_value != m.lemma_value {
            mismatches.push(format!("k = {}: expected N_0 = {}, got {}", m.k, m.lemma_value, m.n0.best_value));
        }
    }
    if limit.verdict.status != MetivierStatus::NotMetivier {
        mismatches.push(format!("k = inf: expected NotMetivier, got {}", limit.verdict.status));
    }
    // liminf over a finite tail: the value at the largest k
    let liminf_finite = finite.last().map_or(0, |m| m.n0.best_value);
    let limit_value = limit.n0.best_value;
    if limit_value <= liminf_finite {
        mismatches.push(format!(
            "k = inf: expected N_0 above the finite-k value {liminf_finite}, got {limit_value}"
        ));
    }

    let rendered = render(family, budget, seed, &members, liminf_finite, limit_value, &mismatches);
    Ok(SemicontinuityReport {
        family: family.name.clone(),
        budget,
        seed,
        members,
        mismatches,
        liminf_finite,
        limit_value,
        rendered,
    })
}

fn render(
    family: &GroupFamily,
    budget: usize,
    seed: u64,
    members: &[MemberSummary],
    liminf: u64,
    limit: u64,
    mismatches: &[String],
) -> String {
    let name = &family.name;
    let mut out = String::new();
    let _ = writeln!(out, "semicontinuity experiment: family {name}, budget {budget}, seed {seed}");
    let _ = writeln!(out, "{:>6}  {:<12}  {:>12}  {:>4}  {:>8}", "k", "status", "min_sigma", "N_0", "2Q-n");
    for m in members {
        let _ = writeln!(
            out,
            "{:>6}  {:<12}  {:>12.4e}  {:>4}  {:>8}",
            m.k.to_string(),
            m.verdict.status.to_string(),
            m.verdict.min_sigma,
            m.n0.best_value,
            m.lemma_value
        );
    }
    let base = name.trim_end_matches("_k");
    let _ = writeln!(out);
    let _ = writeln!(out, "N_0 is bounded above by N_CE, and N_CE is lower semicontinuous along the family.");
    let _ = writeln!(out, "Suppose N_CE({name}) = N_0({name}) for every finite k. Then");
    let _ = writeln!(
        out,
        "  {limit} = N_0({base}_inf) <= N_CE({base}_inf) <= liminf N_CE({name}) = liminf N_0({name}) = {liminf}"
    );
    if mismatches.is_empty() {
        let _ = writeln!(out, "which is a contradiction since {limit} > {liminf}. Hence:");
        let _ = writeln!(out, "  - N_0 is not lower semicontinuous along {name};");
        let _ = writeln!(out, "  - some finite-k member of {name} has N_CE > N_0.");
    } else {
        let _ = writeln!(out, "pattern check FAILED:");
        for m in mismatches {
            let _ = writeln!(out, "  - {m}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::validate_spec;

    #[test]
    fn member_entries() {
        let g1 = gk_member(FamilyIndex::Finite(1));
        assert_eq!(g1.get(1, 3, 1), -1.0);
        assert_eq!(g1.get(3, 1, 1), 1.0);
        let g4 = gk_member(FamilyIndex::Finite(4));
        assert_eq!(g4.get(1, 2, 2), 0.25);
        assert_eq!(g4.get(2, 3, 0), 0.25);
        let inf = gk_member(FamilyIndex::Infinite);
        assert_eq!(inf.get(1, 2, 2), 0.0);
        assert_eq!(inf.get(1, 3, 1), 0.0);
        assert_eq!(inf.get(2, 3, 0), 0.0);
        assert_eq!(inf.upper_entries().count(), 3);
        assert!(validate_spec(&inf).is_valid());
    }

    #[test]
    fn structure_gap_is_one_over_k() {
        let fam = gk_family();
        for k in [1u64, 3, 10, 1000] {
            assert_eq!(fam.structure_gap(FamilyIndex::Finite(k)), 1.0 / k as f64);
            assert_eq!(fam.member(FamilyIndex::Finite(k)).dims(), (7, 10));
        }
        assert_eq!(fam.structure_gap(FamilyIndex::Infinite), 0.0);
    }

    #[test]
    fn index_parsing() {
        assert_eq!("inf".parse::<FamilyIndex>().unwrap(), FamilyIndex::Infinite);
        assert_eq!("12".parse::<FamilyIndex>().unwrap(), FamilyIndex::Finite(12));
        assert!("0".parse::<FamilyIndex>().is_err());
        assert!("x".parse::<FamilyIndex>().is_err());
    }

    #[test]
    fn first_layer_pairs_do_not_see_k() {
        let p = GroupPoint::new(DVector::from_vec(vec![0.1, 0.2, 0.0, 0.3]), DVector::zeros(3));
        let q = GroupPoint::new(DVector::from_vec(vec![0.4, -0.1, 0.2, 0.3]), DVector::zeros(3));
        let p_inv = p.neg();
        let report = convergence_report(&gk_family(), &[(GroupPoint::zeros(4, 3), p_inv.add(&q))], &[1, 8], &DistanceOptions::default()).unwrap();
        let exact = (q.xi - p.xi).norm();
        for row in &report.rows {
            assert!((row.d_k.unwrap() - exact).abs() < 1e-6);
            assert!(row.gap.unwrap() < 1e-6);
        }
    }

    #[test]
    fn small_experiment() {
        let report = semicontinuity_with(&gk_family(), &[1, 2], 40, 3).unwrap();
        assert!(report.pattern_holds(), "{}", report.rendered);
        assert_eq!((report.liminf_finite, report.limit_value), (13, 17));
        assert!(report.rendered.contains("17 = N_0(G_inf) <= N_CE(G_inf) <= liminf N_CE(G_k) = liminf N_0(G_k) = 13"));
        assert!(report.check().is_ok());
    }
}
