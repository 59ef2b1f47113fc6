//! Ionization curves, the m-averaging weights and the cavity droop correction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Which dynamics produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Quantum,
    Classical,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Quantum => "quantum",
            Method::Classical => "classical",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Method::Quantum),
            "classical" => Ok(Method::Classical),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Single |m₀| or the weighted average over all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    M(i32),
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveMeta {
    pub n0: u32,
    pub label: CurveLabel,
    pub method: Method,
    pub droop: bool,
}

/// P_I on a uniform 1 V/cm grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IonizationCurve {
    /// Field values in V/cm, ascending in steps of exactly 1.
    pub field: Vec<f64>,
    pub p_ion: Vec<f64>,
    pub meta: CurveMeta,
}

const GRID_TOL: f64 = 1e-9;

impl IonizationCurve {
    pub fn new(field: Vec<f64>, p_ion: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        let c = Self { field, p_ion, meta };
        c.validate()?;
        Ok(c)
    }

    /// Curve on E_lo, E_lo + 1, … with the given values.
    pub fn from_start(start: f64, p_ion: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        let field = (0..p_ion.len()).map(|k| start + k as f64).collect();
        Self::new(field, p_ion, meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.field.is_empty() || self.field.len() != self.p_ion.len() {
            return Err(Error::Curve(format!(
                "{} fields for {} values",
                self.field.len(),
                self.p_ion.len()
            )));
        }
        if !self.field[0].is_finite() {
            return Err(Error::Curve("non-finite field".into()));
        }
        for (k, w) in self.field.windows(2).enumerate() {
            if ((w[1] - w[0]) - 1.0).abs() > GRID_TOL {
                return Err(Error::Curve(format!("grid step {} → {} at index {k} is not 1 V/cm", w[0], w[1])));
            }
        }
        if let Some(p) = self.p_ion.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Curve(format!("probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.field[0]
    }

    /// Value at grid field `e` (nearest grid point), if inside the grid.
    pub fn at(&self, e: f64) -> Option<f64> {
        let k = (e - self.start()).round();
        (k >= 0.0 && (k as usize) < self.len()).then(|| self.p_ion[k as usize])
    }

    fn same_grid(&self, other: &IonizationCurve) -> bool {
        self.len() == other.len() && (self.start() - other.start()).abs() <= GRID_TOL
    }

    /// Lowest grid field where P_I ≥ `level` holds there and at the next
    /// `hold` grid points.
    pub fn onset(&self, level: f64, hold: usize) -> Option<f64> {
        (0..self.len())
            .find(|&k| k + hold < self.len() && self.p_ion[k..=k + hold].iter().all(|&p| p >= level))
            .map(|k| self.field[k])
    }

    /// First grid field with P_I ≥ `level`.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        self.p_ion.iter().position(|&p| p >= level).map(|k| self.field[k])
    }

    /// Piecewise-linear interpolation of samples at ascending integer fields
    /// onto the 1 V/cm grid between the first and last sample.
    pub fn from_samples(samples: &[(f64, f64)], meta: CurveMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Curve("no samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Curve(format!("sample fields not ascending at {}", w[1].0)));
            }
        }
        for (e, _) in samples {
            if (e - e.round()).abs() > GRID_TOL {
                return Err(Error::Curve(format!("sample field {e} is not on the 1 V/cm grid")));
            }
        }
        let start = samples[0].0.round();
        let end = samples[samples.len() - 1].0.round();
        let n = (end - start) as usize + 1;
        let mut p = Vec::with_capacity(n);
        let mut seg = 0;
        for k in 0..n {
            let e = start + k as f64;
            while seg + 1 < samples.len() - 1 && samples[seg + 1].0 <= e {
                seg += 1;
            }
            let value = if samples.len() == 1 {
                samples[0].1
            } else {
                let (e0, p0) = samples[seg];
                let (e1, p1) = samples[seg + 1];
                p0 + (p1 - p0) * (e - e0) / (e1 - e0)
            };
            p.push(value.clamp(0.0, 1.0));
        }
        Self::from_start(start, p, meta)
    }

    /// CSV `field_V_per_cm,p_ion`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["field_V_per_cm", "p_ion"]).map_err(csv_err)?;
        for (e, p) in self.field.iter().zip(&self.p_ion) {
            w.write_record([e.to_string(), p.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, meta: CurveMeta) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != ["field_V_per_cm", "p_ion"] {
            return Err(Error::Curve(format!("unexpected header {header:?}")));
        }
        let (mut field, mut p) = (Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Curve(format!("row {}: bad number in column {i}", line + 2)))
            };
            field.push(num(0)?);
            p.push(num(1)?);
        }
        Self::new(field, p, meta)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// |m₀| values that are actually computed.
pub const COMPUTED_M0: [i32; 8] = [0, 5, 10, 15, 20, 25, 30, 35];

/// Exact statistical weight of each computed |m₀|.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MWeights {
    pub weights: BTreeMap<i32, Rational64>,
}

impl MWeights {
    /// 179/1369 for m₀ = 0 and (370 − 10|m₀|)/1369 otherwise.
    pub fn standard() -> Self {
        let weights = COMPUTED_M0
            .iter()
            .map(|&m0| {
                let num = if m0 == 0 { 179 } else { 370 - 10 * i64::from(m0) };
                (m0, Rational64::new(num, 1369))
            })
            .collect();
        Self { weights }
    }

    pub fn get(&self, m0: i32) -> Option<Rational64> {
        self.weights.get(&m0.abs()).copied()
    }

    pub fn total(&self) -> Rational64 {
        self.weights.values().fold(Rational64::zero(), |a, b| a + b)
    }
}

/// Recomputed weight of one |m₀| and the m values it stands for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightEntry {
    pub m0: i32,
    pub represented: Vec<i32>,
    pub recomputed: Rational64,
    pub stated: Rational64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightReport {
    pub entries: Vec<WeightEntry>,
    /// Σ over all represented m of (n0 − |m|): n0² for a complete shell.
    pub total_states: i64,
}

/// Assign every m of shell n0 to the computed |m₀| nearest to |m|, give it
/// (n0 − |m|)/n0² and compare the sums with [`MWeights::standard`].
pub fn validate_weights() -> Result<WeightReport> {
    validate_weights_for(37, &COMPUTED_M0, &MWeights::standard())
}

pub fn validate_weights_for(n0: i32, computed: &[i32], stated: &MWeights) -> Result<WeightReport> {
    if n0 < 1 || computed.is_empty() {
        return Err(Error::Weights("need n0 ≥ 1 and at least one computed m₀".into()));
    }
    let denom = i64::from(n0) * i64::from(n0);
    let mut entries: Vec<WeightEntry> = computed
        .iter()
        .map(|&m0| WeightEntry {
            m0,
            represented: Vec::new(),
            recomputed: Rational64::zero(),
            stated: stated.get(m0).unwrap_or_else(Rational64::zero),
        })
        .collect();
    let mut total_states = 0;
    for m in -(n0 - 1)..n0 {
        let k = (0..computed.len())
            .min_by_key(|&k| ((m.abs() - computed[k]).abs(), computed[k]))
            .expect("non-empty");
        let states = i64::from(n0 - m.abs());
        entries[k].represented.push(m);
        entries[k].recomputed += Rational64::new(states, denom);
        total_states += states;
    }
    for e in &entries {
        if e.recomputed != e.stated {
            return Err(Error::Weights(format!(
                "|m0| = {}: recomputed {} but stated {}",
                e.m0, e.recomputed, e.stated
            )));
        }
    }
    if total_states != denom {
        return Err(Error::Weights(format!("{total_states} states represented, expected {denom}")));
    }
    Ok(WeightReport { entries, total_states })
}

/// Pointwise Σ w(m₀) P_{m₀}(E) over all computed m₀.
pub fn m_average(curves: &BTreeMap<i32, IonizationCurve>) -> Result<IonizationCurve> {
    m_average_with(curves, &MWeights::standard())
}

pub fn m_average_with(curves: &BTreeMap<i32, IonizationCurve>, weights: &MWeights) -> Result<IonizationCurve> {
    let first = curves.values().next().ok_or_else(|| Error::Curve("no curves to average".into()))?;
    for m0 in weights.weights.keys() {
        if !curves.keys().any(|k| k.abs() == *m0) {
            return Err(Error::Curve(format!("missing curve for |m0| = {m0}")));
        }
    }
    let mut p = vec![0.0; first.len()];
    for (m0, c) in curves {
        if !c.same_grid(first) {
            return Err(Error::Curve(format!("grid of m0 = {m0} differs from the others")));
        }
        if c.meta.method != first.meta.method || c.meta.droop != first.meta.droop {
            return Err(Error::Curve(format!("m0 = {m0} mixes methods or droop flags")));
        }
        let w = weights
            .get(*m0)
            .ok_or_else(|| Error::Curve(format!("no weight for m0 = {m0}")))?
            .to_f64()
            .expect("finite weight");
        for (acc, v) in p.iter_mut().zip(&c.p_ion) {
            *acc += w * v;
        }
    }
    for v in &mut p {
        *v = v.clamp(0.0, 1.0);
    }
    let meta = CurveMeta { label: CurveLabel::Averaged, ..first.meta };
    IonizationCurve::new(first.field.clone(), p, meta)
}

/// Field amplitude across the beam and the beam's density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopProfile {
    /// g(ρ) = 1 − drop·ρ².
    pub drop: f64,
    /// Number of midpoint nodes in ρ².
    pub nodes: usize,
}

impl Default for DroopProfile {
    fn default() -> Self {
        Self { drop: 0.07, nodes: 32 }
    }
}

impl DroopProfile {
    pub fn none() -> Self {
        Self { drop: 0.0, nodes: 1 }
    }

    pub fn amplitude(&self, rho: f64) -> f64 {
        1.0 - self.drop * rho * rho
    }

    /// Uniform beam density on the unit disk: ∫ d·2ρ dρ = 1 with d ≡ 1.
    pub fn density(&self, _rho: f64) -> f64 {
        1.0
    }

    /// (g(ρ_k), w_k) with ρ_k² = (k + ½)/N and w ∝ d(ρ_k)·Δ(ρ²), normalized.
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        let n = self.nodes.max(1);
        let raw: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let rho = ((k as f64 + 0.5) / n as f64).sqrt();
                (self.amplitude(rho), self.density(rho) / n as f64)
            })
            .collect();
        let total: f64 = raw.iter().map(|(_, w)| w).sum();
        raw.into_iter().map(|(g, w)| (g, w / total)).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop) || self.nodes == 0 {
            return Err(Error::InvalidArgument(format!("invalid droop profile {self:?}")));
        }
        Ok(())
    }
}

/// Beam-averaged curve at every grid field whose local fields all fall on
/// the grid. Local fields g(ρ_k)·E₀ are rounded to the nearest grid point.
pub fn droop_correct(curve: &IonizationCurve, profile: &DroopProfile) -> Result<IonizationCurve> {
    profile.validate()?;
    let quad = profile.quadrature();
    let g_min = quad.iter().map(|(g, _)| *g).fold(1.0, f64::min);
    let first = curve
        .field
        .iter()
        .position(|&e| (g_min * e).round() >= curve.start() - GRID_TOL)
        .ok_or_else(|| Error::Curve("grid too short for the droop correction".into()))?;
    droop_correct_range(curve, profile, curve.field[first], curve.field[curve.len() - 1])
}

/// Corrected curve on the grid points of [lo, hi]; each must be covered.
pub fn droop_correct_range(curve: &IonizationCurve, profile: &DroopProfile, lo: f64, hi: f64) -> Result<IonizationCurve> {
    profile.validate()?;
    let quad = profile.quadrature();
    let k_lo = (lo - curve.start()).round() as i64;
    let k_hi = (hi - curve.start()).round() as i64;
    if k_lo < 0 || k_hi >= curve.len() as i64 || k_hi < k_lo {
        return Err(Error::Curve(format!(
            "requested {lo}..{hi} V/cm outside the curve grid {}..{}",
            curve.start(),
            curve.field[curve.len() - 1]
        )));
    }
    let mut field = Vec::new();
    let mut p = Vec::new();
    for k in k_lo..=k_hi {
        let e0 = curve.field[k as usize];
        let mut acc = 0.0;
        for (g, w) in &quad {
            let local = (g * e0).round();
            let v = curve.at(local).filter(|_| local >= curve.start() - GRID_TOL).ok_or_else(|| {
                Error::Curve(format!("local field {local} V/cm for center {e0} is below the grid start {}", curve.start()))
            })?;
            acc += w * v;
        }
        field.push(e0);
        p.push(acc.clamp(0.0, 1.0));
    }
    IonizationCurve::new(field, p, CurveMeta { droop: true, ..curve.meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(m0: i32) -> CurveMeta {
        CurveMeta { n0: 37, label: CurveLabel::M(m0), method: Method::Quantum, droop: false }
    }

    #[test]
    fn standard_weights() {
        let w = MWeights::standard();
        assert_eq!(w.get(0), Some(Rational64::new(179, 1369)));
        assert_eq!(w.get(5), Some(Rational64::new(320, 1369)));
        assert_eq!(w.get(-35), Some(Rational64::new(20, 1369)));
        assert_eq!(w.total(), Rational64::new(1, 1));
    }

    #[test]
    fn weights_recomputed_from_represented_states() {
        let r = validate_weights().unwrap();
        assert_eq!(r.total_states, 1369);
        let e0 = &r.entries[0];
        assert_eq!(e0.represented, vec![-2, -1, 0, 1, 2]);
        assert_eq!(e0.recomputed, Rational64::new(37 + 2 * 36 + 2 * 35, 1369));
        let e35 = r.entries.iter().find(|e| e.m0 == 35).unwrap();
        assert_eq!(e35.represented, vec![-36, -35, -34, -33, 33, 34, 35, 36]);
        assert_eq!(e35.recomputed, Rational64::new(2 * (4 + 3 + 2 + 1), 1369));
    }

    #[test]
    fn wrong_weights_are_fatal() {
        let mut w = MWeights::standard();
        w.weights.insert(10, Rational64::new(271, 1369));
        assert!(matches!(validate_weights_for(37, &COMPUTED_M0, &w), Err(Error::Weights(_))));
    }

    #[test]
    fn grid_must_be_unit_spaced() {
        assert!(IonizationCurve::new(vec![1.0, 2.0, 4.0], vec![0.0; 3], meta(0)).is_err());
        assert!(IonizationCurve::new(vec![1.0, 2.0], vec![0.0, 1.5], meta(0)).is_err());
        assert!(IonizationCurve::new(vec![1.0, 2.0], vec![0.0], meta(0)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = IonizationCurve::from_start(300.0, vec![0.0, 0.125, 0.3333333333333333], meta(5)).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("field_V_per_cm,p_ion\n300,0\n301,0.125\n"));
        assert_eq!(IonizationCurve::read_csv(&buf[..], meta(5)).unwrap(), c);
    }

    #[test]
    fn samples_interpolate_linearly() {
        let c = IonizationCurve::from_samples(&[(10.0, 0.0), (14.0, 0.4), (15.0, 1.0)], meta(0)).unwrap();
        assert_eq!(c.field, vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0]);
        let expect = [0.0, 0.1, 0.2, 0.3, 0.4, 1.0];
        for (a, b) in c.p_ion.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_m0_is_rejected() {
        let mut curves = BTreeMap::new();
        for m0 in [0, 5, 10] {
            curves.insert(m0, IonizationCurve::from_start(1.0, vec![0.5; 3], meta(m0)).unwrap());
        }
        assert!(m_average(&curves).is_err());
    }

    #[test]
    fn onset_needs_a_sustained_run() {
        let c = IonizationCurve::from_start(100.0, vec![0.0, 0.2, 0.0, 0.1, 0.2, 0.3, 0.4], meta(0)).unwrap();
        assert_eq!(c.onset(0.1, 3), Some(103.0));
        assert_eq!(c.onset(0.1, 4), None);
        assert_eq!(c.first_crossing(0.1), Some(101.0));
    }

    #[test]
    fn step_is_smeared_over_the_droop_width() {
        let e_star = 400.0;
        let field: Vec<f64> = (300..=500).map(f64::from).collect();
        let p = field.iter().map(|&e| if e >= e_star { 1.0 } else { 0.0 }).collect();
        let c = IonizationCurve::new(field, p, meta(0)).unwrap();
        let profile = DroopProfile::default();
        let d = droop_correct(&c, &profile).unwrap();
        // Brute force: fraction of equal-weight nodes whose rounded local field reaches E*.
        for (e0, got) in d.field.iter().zip(&d.p_ion) {
            let hits = (0..32)
                .filter(|k| ((1.0 - 0.07 * (*k as f64 + 0.5) / 32.0) * e0).round() >= e_star)
                .count();
            assert!((got - hits as f64 / 32.0).abs() < 1e-12, "{e0}");
        }
        assert_eq!(d.at(399.0), Some(0.0));
        assert!(d.at(401.0).unwrap() > 0.0 && d.at(401.0).unwrap() < 0.1);
        assert_eq!(d.at((e_star / 0.93_f64).ceil() + 1.0), Some(1.0));
        assert!(d.at(425.0).unwrap() < 1.0);
    }

    #[test]
    fn zero_droop_is_identity() {
        let c = IonizationCurve::from_start(10.0, vec![0.1, 0.7, 0.2, 0.9], meta(0)).unwrap();
        let d = droop_correct(&c, &DroopProfile::none()).unwrap();
        assert_eq!(d.p_ion, c.p_ion);
        assert!(d.meta.droop);
    }

    #[test]
    fn coverage_is_checked() {
        let c = IonizationCurve::from_start(100.0, vec![0.5; 5], meta(0)).unwrap();
        assert!(droop_correct(&c, &DroopProfile::default()).is_err());
        let long = IonizationCurve::from_start(100.0, vec![0.5; 20], meta(0)).unwrap();
        assert!(droop_correct_range(&long, &DroopProfile::default(), 100.0, 119.0).is_err());
        let d = droop_correct_range(&long, &DroopProfile::default(), 108.0, 119.0).unwrap();
        assert!(d.p_ion.iter().all(|&p| (p - 0.5).abs() < 1e-15));
    }

    fn random_curves() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 60), 8)
    }

    proptest! {
        #[test]
        fn average_is_convex(values in random_curves()) {
            let curves: BTreeMap<i32, IonizationCurve> = COMPUTED_M0.iter().zip(&values)
                .map(|(&m0, v)| (m0, IonizationCurve::from_start(200.0, v.clone(), meta(m0)).unwrap()))
                .collect();
            let avg = m_average(&curves).unwrap();
            for k in 0..avg.len() {
                let lo = values.iter().map(|v| v[k]).fold(1.0, f64::min);
                let hi = values.iter().map(|v| v[k]).fold(0.0, f64::max);
                prop_assert!(avg.p_ion[k] >= lo - 1e-15 && avg.p_ion[k] <= hi + 1e-15);
            }
        }

        #[test]
        fn identical_curves_average_to_themselves(v in prop::collection::vec(0.0..=1.0f64, 30)) {
            let curves: BTreeMap<i32, IonizationCurve> = COMPUTED_M0.iter()
                .map(|&m0| (m0, IonizationCurve::from_start(50.0, v.clone(), meta(m0)).unwrap()))
                .collect();
            let avg = m_average(&curves).unwrap();
            for (a, b) in avg.p_ion.iter().zip(&v) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }

        #[test]
        fn droop_commutes_with_average(values in random_curves()) {
            let profile = DroopProfile::default();
            let curves: BTreeMap<i32, IonizationCurve> = COMPUTED_M0.iter().zip(&values)
                .map(|(&m0, v)| (m0, IonizationCurve::from_start(200.0, v.clone(), meta(m0)).unwrap()))
                .collect();
            let a = droop_correct(&m_average(&curves).unwrap(), &profile).unwrap();
            let corrected: BTreeMap<i32, IonizationCurve> = curves.iter()
                .map(|(m0, c)| (*m0, droop_correct(c, &profile).unwrap()))
                .collect();
            let b = m_average(&corrected).unwrap();
            prop_assert_eq!(&a.field, &b.field);
            for (x, y) in a.p_ion.iter().zip(&b.p_ion) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn droop_stays_within_range(v in prop::collection::vec(0.0..=1.0f64, 80)) {
            let c = IonizationCurve::from_start(300.0, v.clone(), meta(0)).unwrap();
            let d = droop_correct(&c, &DroopProfile::default()).unwrap();
            let lo = v.iter().copied().fold(1.0, f64::min);
            let hi = v.iter().copied().fold(0.0, f64::max);
            prop_assert!(d.p_ion.iter().all(|&p| p >= lo - 1e-15 && p <= hi + 1e-15));
        }

        #[test]
        fn constant_curve_is_fixed(c in 0.0..=1.0f64) {
            let curve = IonizationCurve::from_start(300.0, vec![c; 40], meta(0)).unwrap();
            let d = droop_correct(&curve, &DroopProfile::default()).unwrap();
            prop_assert!(d.p_ion.iter().all(|&p| (p - c).abs() < 1e-14));
        }
    }
}
