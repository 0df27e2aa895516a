//! AVaR and finite AVaR-mixture (Kusuoka type) risk functionals.
//!
//! A risk spec is a finite set of discrete probability measures on `(0, 1]`;
//! the risk of a law is the largest of the measure-weighted AVaR averages.
//! Every evaluation path funnels through the set of distinct AVaR levels of the
//! spec so that each level is computed once per law.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;
/// Tolerance the file loader accepts on measure weight sums before renormalizing.
pub const LOADER_WEIGHT_TOL: f64 = 1e-9;
/// Float slack used when checking the shape of curves.
pub const CURVE_SHAPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub xi: f64,
    pub weight: f64,
}

/// A discrete probability measure on `(0, 1]` mixing AVaR levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralMeasure {
    pub atoms: Vec<Atom>,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let m = SpectralMeasure { atoms };
        m.check_atoms()?;
        let s = m.weight_sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::validation(format!(
                "measure weights sum to {s}, not 1"
            )));
        }
        Ok(m)
    }

    /// Point mass at level `xi`.
    pub fn dirac(xi: f64) -> Result<Self> {
        SpectralMeasure::new(vec![Atom { xi, weight: 1.0 }])
    }

    fn check_atoms(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::validation("measure has no atoms"));
        }
        for a in &self.atoms {
            if !(a.xi > 0.0 && a.xi <= 1.0) {
                return Err(Error::validation(format!(
                    "atom level {} outside (0, 1]",
                    a.xi
                )));
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::validation(format!(
                    "atom weight {} is not non-negative",
                    a.weight
                )));
            }
        }
        Ok(())
    }

    pub fn weight_sum(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

/// Record of a measure whose weights were rescaled to sum to one on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationNote {
    pub measure_index: usize,
    pub original_sum: f64,
}

/// The set of mixing measures, with the distinct AVaR levels pre-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSpec {
    measures: Vec<SpectralMeasure>,
    b: f64,
    levels: Vec<f64>,
    atom_levels: Vec<Vec<usize>>,
}

impl RiskSpec {
    pub fn new(measures: Vec<SpectralMeasure>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::validation("risk spec needs at least one measure"));
        }
        for (n, m) in measures.iter().enumerate() {
            m.check_atoms()
                .map_err(|e| Error::validation(format!("measure {n}: {e}")))?;
            let s = m.weight_sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::validation(format!(
                    "measure {n}: weights sum to {s}, not 1"
                )));
            }
        }
        let mut levels: Vec<f64> = measures
            .iter()
            .flat_map(|m| m.atoms.iter().map(|a| a.xi))
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let atom_levels = measures
            .iter()
            .map(|m| {
                m.atoms
                    .iter()
                    .map(|a| {
                        levels
                            .binary_search_by(|l| l.total_cmp(&a.xi))
                            .expect("level present")
                    })
                    .collect()
            })
            .collect();
        let b = levels[0];
        Ok(RiskSpec {
            measures,
            b,
            levels,
            atom_levels,
        })
    }

    /// The spec `{δ_1}`: plain expectation.
    pub fn expectation() -> Self {
        RiskSpec::new(vec![SpectralMeasure::dirac(1.0).unwrap()]).unwrap()
    }

    /// The four-measure benchmark set
    /// `{0.2δ_0.2 + 0.8δ_1, δ_0.5, 0.1δ_0.05 + 0.5δ_0.4 + 0.6δ_0.6, 0.5δ_0.3 + 0.5δ_0.8}`.
    /// The third measure as listed has total mass 1.2 and is rescaled; the note says so.
    pub fn benchmark() -> (Self, Vec<NormalizationNote>) {
        RiskSpec::from_json_str(BENCHMARK_RISK_JSON, true).expect("benchmark spec is well formed")
    }

    pub fn measures(&self) -> &[SpectralMeasure] {
        &self.measures
    }

    /// Smallest atom level across all measures.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Distinct AVaR levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `max_μ Σ_atoms weight · avar[level]` given AVaR values aligned with [`Self::levels`].
    pub fn combine(&self, avar_by_level: &[f64]) -> f64 {
        self.measures
            .iter()
            .zip(&self.atom_levels)
            .map(|(m, idx)| {
                m.atoms
                    .iter()
                    .zip(idx)
                    .map(|(a, &l)| a.weight * avar_by_level[l])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Parse the file format: a JSON list of measures, each a list of `{xi, weight}`.
    /// Weight sums off by more than [`LOADER_WEIGHT_TOL`] are rejected unless
    /// `normalize` is set, in which case they are rescaled and reported.
    pub fn from_json_str(s: &str, normalize: bool) -> Result<(Self, Vec<NormalizationNote>)> {
        let raw: Vec<Vec<Atom>> = serde_json::from_str(s)?;
        let mut notes = Vec::new();
        let mut measures = Vec::with_capacity(raw.len());
        for (n, atoms) in raw.into_iter().enumerate() {
            let mut m = SpectralMeasure { atoms };
            m.check_atoms()
                .map_err(|e| Error::validation(format!("measure {n}: {e}")))?;
            let sum = m.weight_sum();
            if (sum - 1.0).abs() > LOADER_WEIGHT_TOL {
                if !normalize {
                    return Err(Error::validation(format!(
                        "measure {n} has weights summing to {sum}, not 1 (pass --normalize to rescale)"
                    )));
                }
                notes.push(NormalizationNote {
                    measure_index: n,
                    original_sum: sum,
                });
            }
            if sum <= 0.0 {
                return Err(Error::validation(format!(
                    "measure {n} has zero total weight"
                )));
            }
            m.atoms.iter_mut().for_each(|a| a.weight /= sum);
            measures.push(m);
        }
        Ok((RiskSpec::new(measures)?, notes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.measures).expect("serializable")
    }

    pub fn hash(&self) -> String {
        crate::hashing::json_hash(&self.measures)
    }
}

impl Serialize for RiskSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.measures.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RiskSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let measures = Vec::<SpectralMeasure>::deserialize(d)?;
        RiskSpec::new(measures).map_err(serde::de::Error::custom)
    }
}

/// The benchmark measure set exactly as listed, third measure unnormalized.
pub const BENCHMARK_RISK_JSON: &str = r#"[
  [{"xi": 0.2, "weight": 0.2}, {"xi": 1.0, "weight": 0.8}],
  [{"xi": 0.5, "weight": 1.0}],
  [{"xi": 0.05, "weight": 0.1}, {"xi": 0.4, "weight": 0.5}, {"xi": 0.6, "weight": 0.6}],
  [{"xi": 0.3, "weight": 0.5}, {"xi": 0.8, "weight": 0.5}]
]"#;

/// A finitely supported law given as `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub points: Vec<(f64, f64)>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("distribution has no atoms"));
        }
        if let Some(&(v, p)) = points
            .iter()
            .find(|(v, p)| !v.is_finite() || !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::validation(format!("invalid atom ({v}, {p})")));
        }
        let s: f64 = points.iter().map(|p| p.1).sum();
        if (s - 1.0).abs() > PROB_TOL {
            return Err(Error::validation(format!(
                "probabilities sum to {s}, not 1"
            )));
        }
        Ok(DiscreteDistribution { points })
    }

    pub fn point_mass(value: f64) -> Self {
        DiscreteDistribution {
            points: vec![(value, 1.0)],
        }
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(v, p)| v * p).sum()
    }

    /// `E[(Z - q)_+]`.
    pub fn partial_expectation(&self, q: f64) -> f64 {
        self.points.iter().map(|&(v, p)| p * (v - q).max(0.0)).sum()
    }

    fn sorted_desc(&self) -> Vec<(f64, f64)> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| b.0.total_cmp(&a.0));
        pts
    }
}

fn check_level(xi: f64) -> Result<()> {
    if xi > 0.0 && xi <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("AVaR level {xi} outside (0, 1]")))
    }
}

/// AVaR at every level of `levels` (ascending, each in `(0, 1]`) for atoms
/// sorted by value, descending. Walks the upper tail once: each level's value is
/// the average of the top `xi` mass, with the boundary atom contributing a fraction.
pub(crate) fn avar_levels_sorted_desc<I>(atoms_desc: I, levels: &[f64], out: &mut [f64])
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut next = 0;
    let mut mass = 0.0;
    let mut acc = 0.0;
    let mut last = 0.0;
    for (z, p) in atoms_desc {
        if p <= 0.0 {
            continue;
        }
        last = z;
        while next < levels.len() && levels[next] <= mass + p {
            let xi = levels[next];
            out[next] = (acc + (xi - mass) * z) / xi;
            next += 1;
        }
        if next == levels.len() {
            return;
        }
        mass += p;
        acc += p * z;
    }
    // Total mass fell a rounding error short of the largest levels.
    for l in next..levels.len() {
        let xi = levels[l];
        out[l] = (acc + (xi - mass).max(0.0) * last) / xi;
    }
}

/// `AVaR_xi(Z) = inf_q { q + E[(Z - q)_+] / xi }` via the sorted-tail rule.
pub fn avar(dist: &DiscreteDistribution, xi: f64) -> Result<f64> {
    check_level(xi)?;
    let mut out = [0.0];
    avar_levels_sorted_desc(dist.sorted_desc(), &[xi], &mut out);
    Ok(out[0])
}

/// The same quantity by scanning the objective `q + E[(Z - q)_+] / xi` over the
/// atom values, where the piecewise linear objective has its kinks.
pub fn avar_qscan(dist: &DiscreteDistribution, xi: f64) -> Result<f64> {
    check_level(xi)?;
    Ok(dist
        .points
        .iter()
        .map(|&(q, _)| q + dist.partial_expectation(q) / xi)
        .fold(f64::INFINITY, f64::min))
}

/// `max_{μ ∈ M} Σ_atoms weight · AVaR_xi(Z)`.
pub fn kusuoka_risk(dist: &DiscreteDistribution, spec: &RiskSpec) -> f64 {
    let mut av = vec![0.0; spec.levels().len()];
    avar_levels_sorted_desc(dist.sorted_desc(), spec.levels(), &mut av);
    spec.combine(&av)
}

/// Piecewise linear curve `q -> g(q)`, typically `E[(Z - q)_+]`.
///
/// Left of the first breakpoint the curve continues with `left_slope`; right of
/// the last one with `right_slope`, floored at zero. Curves built from laws use
/// slope -1 on the left and are identically zero on the right; tabulated curves
/// extend as constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurve {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub left_slope: f64,
    pub right_slope: f64,
}

impl GCurve {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    ) -> Result<Self> {
        let c = GCurve {
            breakpoints,
            values,
            left_slope,
            right_slope,
        };
        c.validate_structure()?;
        Ok(c)
    }

    /// Curve with constant extrapolation on both sides.
    pub fn tabulated(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        GCurve::new(breakpoints, values, 0.0, 0.0)
    }

    fn validate_structure(&self) -> Result<()> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.values.len() {
            return Err(Error::validation(
                "curve needs equally many (and at least one) breakpoints and values",
            ));
        }
        if self
            .breakpoints
            .iter()
            .chain(&self.values)
            .any(|x| !x.is_finite())
        {
            return Err(Error::validation("curve has non-finite entries"));
        }
        if self.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "curve breakpoints must be strictly increasing",
            ));
        }
        for s in [self.left_slope, self.right_slope] {
            if !(-1.0..=0.0).contains(&s) {
                return Err(Error::validation(format!(
                    "extrapolation slope {s} outside [-1, 0]"
                )));
            }
        }
        Ok(())
    }

    /// Non-negative, non-increasing, and slopes in `[-1, 0]` between breakpoints.
    pub fn check_shape(&self) -> Result<()> {
        self.validate_structure()?;
        if let Some(v) = self.values.iter().find(|v| **v < 0.0) {
            return Err(Error::validation(format!("curve value {v} is negative")));
        }
        for (m, (b, v)) in self
            .breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .enumerate()
        {
            if v[1] > v[0] {
                return Err(Error::validation(format!(
                    "curve increases between breakpoints {m} and {}",
                    m + 1
                )));
            }
            if v[0] - v[1] > (b[1] - b[0]) + CURVE_SHAPE_TOL {
                return Err(Error::validation(format!(
                    "curve slope below -1 between breakpoints {m} and {}",
                    m + 1
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, q: f64) -> f64 {
        let bp = &self.breakpoints;
        let n = bp.len();
        if q <= bp[0] {
            return self.values[0] + self.left_slope * (q - bp[0]);
        }
        if q >= bp[n - 1] {
            return (self.values[n - 1] + self.right_slope * (q - bp[n - 1])).max(0.0);
        }
        let m = bp.partition_point(|&b| b <= q) - 1;
        let t = (q - bp[m]) / (bp[m + 1] - bp[m]);
        self.values[m] + t * (self.values[m + 1] - self.values[m])
    }

    /// Points in `[q_lo, q_hi]` where the curve can change slope, plus both ends.
    fn kinks_within(&self, q_lo: f64, q_hi: f64) -> Vec<f64> {
        let mut qs = vec![q_lo];
        qs.extend(
            self.breakpoints
                .iter()
                .copied()
                .filter(|&b| b > q_lo && b < q_hi),
        );
        let n = self.breakpoints.len();
        if self.right_slope < 0.0 && self.values[n - 1] > 0.0 {
            let zero = self.breakpoints[n - 1] - self.values[n - 1] / self.right_slope;
            if zero > q_lo && zero < q_hi {
                qs.push(zero);
            }
        }
        qs.push(q_hi);
        qs
    }
}

/// Curve `q -> Σ p (z - q)_+` with a breakpoint at every distinct atom value.
pub fn curve_from_distribution(dist: &DiscreteDistribution) -> GCurve {
    let mut pts = dist.points.clone();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bps: Vec<f64> = Vec::with_capacity(pts.len());
    let mut mass_at: Vec<f64> = Vec::with_capacity(pts.len());
    for (z, p) in pts {
        if bps.last() == Some(&z) {
            *mass_at.last_mut().unwrap() += p;
        } else {
            bps.push(z);
            mass_at.push(p);
        }
    }
    let n = bps.len();
    let mut values = vec![0.0; n];
    // Walk down from the top: between consecutive breakpoints the curve falls
    // with slope equal to the mass strictly above the lower one.
    let mut above = 0.0;
    for m in (0..n.saturating_sub(1)).rev() {
        above = (above + mass_at[m + 1]).min(1.0);
        values[m] = values[m + 1] + above * (bps[m + 1] - bps[m]);
    }
    GCurve {
        breakpoints: bps,
        values,
        left_slope: -1.0,
        right_slope: 0.0,
    }
}

/// Minimum of `q + g(q)/xi` over candidate points for each level, combined over the spec.
pub(crate) fn risk_on_candidates(
    qs: &[f64],
    gs: &[f64],
    spec: &RiskSpec,
    scratch: &mut [f64],
) -> f64 {
    for (l, &xi) in spec.levels().iter().enumerate() {
        let inv = 1.0 / xi;
        scratch[l] = qs
            .iter()
            .zip(gs)
            .map(|(&q, &g)| q + inv * g)
            .fold(f64::INFINITY, f64::min);
    }
    spec.combine(scratch)
}

/// `max_μ Σ weight · min_{q ∈ [q_lo, q_hi]} { q + g(q)/xi }`, exact for piecewise
/// linear curves by scanning breakpoints and interval ends.
pub fn risk_from_gcurve(curve: &GCurve, spec: &RiskSpec, q_lo: f64, q_hi: f64) -> Result<f64> {
    curve.validate_structure()?;
    if !(q_lo.is_finite() && q_hi.is_finite() && q_lo < q_hi) {
        return Err(Error::validation(format!(
            "invalid q interval [{q_lo}, {q_hi}]"
        )));
    }
    let qs = curve.kinks_within(q_lo, q_hi);
    let gs: Vec<f64> = qs.iter().map(|&q| curve.eval(q)).collect();
    let mut scratch = vec![0.0; spec.levels().len()];
    Ok(risk_on_candidates(&qs, &gs, spec, &mut scratch))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin() -> DiscreteDistribution {
        DiscreteDistribution::new(vec![(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn avar_at_one_is_mean() {
        let d = DiscreteDistribution::new(vec![(0.3, 0.2), (1.1, 0.5), (-0.4, 0.3)]).unwrap();
        assert!((avar(&d, 1.0).unwrap() - d.mean()).abs() < 1e-15);
    }

    #[test]
    fn avar_of_constant() {
        let d = DiscreteDistribution::point_mass(0.7);
        for xi in [0.01, 0.3, 1.0] {
            assert!((avar(&d, xi).unwrap() - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn avar_half_of_coin_is_one() {
        assert_eq!(avar(&coin(), 0.5).unwrap(), 1.0);
        assert_eq!(avar_qscan(&coin(), 0.5).unwrap(), 1.0);
    }

    #[test]
    fn avar_rejects_bad_levels() {
        assert!(matches!(avar(&coin(), 0.0), Err(Error::Domain(_))));
        assert!(matches!(avar(&coin(), 1.5), Err(Error::Domain(_))));
        assert!(avar_qscan(&coin(), -0.1).is_err());
    }

    #[test]
    fn kusuoka_examples() {
        let mean_only = RiskSpec::expectation();
        assert_eq!(kusuoka_risk(&coin(), &mean_only), 0.5);
        let two = RiskSpec::new(vec![
            SpectralMeasure::dirac(1.0).unwrap(),
            SpectralMeasure::dirac(0.5).unwrap(),
        ])
        .unwrap();
        assert_eq!(kusuoka_risk(&coin(), &two), 1.0);
        let (bench, _) = RiskSpec::benchmark();
        assert!(
            (kusuoka_risk(&DiscreteDistribution::point_mass(0.37), &bench) - 0.37).abs() < 1e-15
        );
    }

    #[test]
    fn empty_spec_is_rejected() {
        assert!(matches!(RiskSpec::new(vec![]), Err(Error::Validation(_))));
    }

    #[test]
    fn benchmark_spec_loads_only_with_normalize() {
        let err = RiskSpec::from_json_str(BENCHMARK_RISK_JSON, false).unwrap_err();
        assert!(err.to_string().contains("measure 2"), "{err}");
        let (spec, notes) = RiskSpec::benchmark();
        assert_eq!(
            notes,
            vec![NormalizationNote {
                measure_index: 2,
                original_sum: 0.1 + 0.5 + 0.6
            }]
        );
        assert_eq!(spec.b(), 0.05);
        assert_eq!(spec.measures().len(), 4);
        let third = &spec.measures()[2];
        assert!((third.atoms[0].weight - 1.0 / 12.0).abs() < 1e-15);
        assert!((third.atoms[1].weight - 5.0 / 12.0).abs() < 1e-15);
        assert!((third.atoms[2].weight - 0.5).abs() < 1e-15);
        assert_eq!(spec.levels(), &[0.05, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let (spec, _) = RiskSpec::benchmark();
        let (back, notes) = RiskSpec::from_json_str(&spec.to_json(), false).unwrap();
        assert!(notes.is_empty());
        assert_eq!(back.hash(), spec.hash());
    }

    #[test]
    fn loader_rejects_bad_levels() {
        assert!(RiskSpec::from_json_str(r#"[[{"xi": 0.0, "weight": 1.0}]]"#, true).is_err());
        assert!(RiskSpec::from_json_str(r#"[[{"xi": 1.2, "weight": 1.0}]]"#, true).is_err());
        assert!(RiskSpec::from_json_str(r#"[]"#, true).is_err());
    }

    #[test]
    fn curve_of_point_mass() {
        let c = curve_from_distribution(&DiscreteDistribution::point_mass(0.5));
        for q in [-1.0, 0.0, 0.2, 0.5, 0.9] {
            assert!((c.eval(q) - (0.5f64 - q).max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn coin_curve_at_zero() {
        let c = curve_from_distribution(&coin());
        assert_eq!(c.eval(0.0), 0.5);
        assert_eq!(c.eval(0.5), 0.25);
        c.check_shape().unwrap();
    }

    #[test]
    fn risk_from_gcurve_examples() {
        let spec = RiskSpec::new(vec![SpectralMeasure::dirac(0.5).unwrap()]).unwrap();
        let zero = GCurve::tabulated(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(risk_from_gcurve(&zero, &spec, 0.25, 2.0).unwrap(), 0.25);

        let c = curve_from_distribution(&DiscreteDistribution::point_mass(0.6));
        let (bench, _) = RiskSpec::benchmark();
        assert!((risk_from_gcurve(&c, &bench, 0.0, 2.0).unwrap() - 0.6).abs() < 1e-15);

        let coin_curve = curve_from_distribution(&coin());
        assert_eq!(risk_from_gcurve(&coin_curve, &spec, 0.0, 1.5).unwrap(), 1.0);
        assert_eq!(kusuoka_risk(&coin(), &spec), 1.0);
    }

    #[test]
    fn risk_from_gcurve_rejects_malformed() {
        let spec = RiskSpec::expectation();
        let c = curve_from_distribution(&coin());
        assert!(risk_from_gcurve(&c, &spec, 1.0, 1.0).is_err());
        let bad = GCurve {
            breakpoints: vec![0.0, 0.0],
            values: vec![1.0, 0.0],
            left_slope: 0.0,
            right_slope: 0.0,
        };
        assert!(risk_from_gcurve(&bad, &spec, 0.0, 1.0).is_err());
        assert!(GCurve::new(vec![0.0], vec![1.0], -2.0, 0.0).is_err());
    }

    #[test]
    fn shape_check_catches_violations() {
        assert!(GCurve::tabulated(vec![0.0, 1.0], vec![0.2, 0.3])
            .unwrap()
            .check_shape()
            .is_err());
        assert!(GCurve::tabulated(vec![0.0, 0.1], vec![0.5, 0.0])
            .unwrap()
            .check_shape()
            .is_err());
        assert!(GCurve::tabulated(vec![0.0, 1.0], vec![-0.1, -0.2])
            .unwrap()
            .check_shape()
            .is_err());
    }

    #[test]
    fn right_extrapolation_kink_is_scanned() {
        // g = (1 - q)_+ represented by a single breakpoint and slope -1 to the right.
        let c = GCurve::new(vec![0.0], vec![1.0], -1.0, -1.0).unwrap();
        let spec = RiskSpec::new(vec![SpectralMeasure::dirac(0.5).unwrap()]).unwrap();
        // Point mass at 1: risk 1, attained at q = 1.
        assert!((risk_from_gcurve(&c, &spec, 0.0, 3.0).unwrap() - 1.0).abs() < 1e-15);
    }
}
