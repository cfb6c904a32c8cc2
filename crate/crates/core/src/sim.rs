//! Replication harness: sample each data-generating process, sweep the
//! bandwidth, estimate every requested measure and summarize by medians.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{sample, BuiltinModel};
use crate::error::{Error, Result};
use crate::estimators::{
    ckt_at_design, ckt_measure, default_design, AveVariant, CopulaMeasures, EstimatorMeasure, Kernel, KernelSpec,
};
use crate::numeric::{log_space, quantile_sorted};
use crate::oracle::{self, OracleMeasure, OracleSpec};

/// A measure together with its average-copula estimator (only meaningful
/// for measures that compare with the average copula).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeasureVariant {
    pub measure: EstimatorMeasure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ave_variant: Option<AveVariant>,
}

impl MeasureVariant {
    pub fn new(measure: EstimatorMeasure, ave_variant: Option<AveVariant>) -> Self {
        MeasureVariant { measure, ave_variant }
    }

    fn ave(&self) -> AveVariant {
        self.ave_variant.unwrap_or_default()
    }

    fn ave_label(&self) -> &'static str {
        self.ave_variant.map_or("none", AveVariant::name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dgps: Vec<BuiltinModel>,
    pub n: usize,
    pub replications: usize,
    pub h_grid: Vec<f64>,
    pub measures: Vec<MeasureVariant>,
    pub base_seed: u64,
    pub n_design: usize,
    pub u_grid: usize,
    pub kernel: Kernel,
    /// Overrides the per-measure default of kernel smoothing on ranks of `Z`.
    pub pseudo_z: Option<bool>,
    /// Write wall-clock times into `elapsed_ms`; off by default so outputs are reproducible.
    pub record_timings: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        use EstimatorMeasure::*;
        SimConfig {
            dgps: BuiltinModel::ALL.to_vec(),
            n: 2000,
            replications: 50,
            h_grid: log_space(0.03, 0.5, 10),
            measures: vec![
                MeasureVariant::new(Psi1Cvm, Some(AveVariant::Cs3)),
                MeasureVariant::new(Psi1Cvm, Some(AveVariant::Cs4)),
                MeasureVariant::new(Psi1Ks, Some(AveVariant::Cs3)),
                MeasureVariant::new(Psi1Ks, Some(AveVariant::Cs4)),
                MeasureVariant::new(Psi0TildeCvm, None),
                MeasureVariant::new(Psi0TildeKs, None),
            ],
            base_seed: 20_240_601,
            n_design: 20,
            u_grid: 50,
            kernel: Kernel::Epanechnikov,
            pseudo_z: None,
            record_timings: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dgps.is_empty() {
            return bad("dgps must not be empty".into());
        }
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.h_grid.is_empty() {
            return bad("h_grid must not be empty".into());
        }
        if let Some(h) = self.h_grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return bad(format!("bandwidths must be positive, got {h}"));
        }
        if self.measures.is_empty() {
            return bad("measures must not be empty".into());
        }
        for m in &self.measures {
            if m.measure.uses_average() != m.ave_variant.is_some() {
                return bad(format!(
                    "measure {} {} an ave_variant",
                    m.measure,
                    if m.measure.uses_average() {
                        "needs"
                    } else {
                        "does not take"
                    }
                ));
            }
        }
        if self.n_design < 2 {
            return bad(format!("n_design must be at least 2, got {}", self.n_design));
        }
        if self.u_grid < 3 {
            return bad(format!("u_grid must be at least 3, got {}", self.u_grid));
        }
        Ok(())
    }

    /// Indices of the middle third of the bandwidth grid.
    pub fn mid_h_indices(&self) -> std::ops::Range<usize> {
        let len = self.h_grid.len();
        len / 3..(2 * len).div_ceil(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResultRow {
    pub dgp: BuiltinModel,
    pub variant: MeasureVariant,
    pub h: f64,
    pub rep: usize,
    /// `None` when estimation failed (for instance an empty kernel window).
    pub estimate: Option<f64>,
    pub true_value: f64,
    pub elapsed_ms: u64,
}

/// Population value targeted by `variant` under `dgp`.
///
/// Copula-based measures use the oracle at default grids. Kendall's tau
/// measures apply the same finite-design formula to the true `tau(z)` at the
/// population design points `(i - 0.5) / n_design` of `Z ~ U(0, 1)`.
pub fn true_value(dgp: BuiltinModel, variant: MeasureVariant, n_design: usize) -> Result<f64> {
    static CACHE: Mutex<BTreeMap<(BuiltinModel, EstimatorMeasure, usize), f64>> = Mutex::new(BTreeMap::new());
    let key = (dgp, variant.measure, n_design);
    if let Some(&v) = CACHE.lock().expect("cache lock").get(&key) {
        return Ok(v);
    }
    let v = compute_true_value(dgp, variant, n_design)?;
    CACHE.lock().expect("cache lock").insert(key, v);
    Ok(v)
}

fn compute_true_value(dgp: BuiltinModel, variant: MeasureVariant, n_design: usize) -> Result<f64> {
    if dgp.is_simplified() {
        return Ok(0.0);
    }
    let model = dgp.model();
    let oracle_measure = match variant.measure {
        EstimatorMeasure::Psi1Cvm => OracleMeasure::Psi1Cvm,
        EstimatorMeasure::Psi1Ks => OracleMeasure::Psi1Ks,
        EstimatorMeasure::Psi0TildeCvm => OracleMeasure::Psi0Cvm,
        EstimatorMeasure::Psi0TildeKs => OracleMeasure::Psi0Ks,
        ckt => {
            let (lo, hi) = crate::copula::ConditionalCopula::z_domain(&model);
            let taus: Vec<f64> = (1..=n_design)
                .map(|i| {
                    let z = lo + (hi - lo) * (i as f64 - 0.5) / n_design as f64;
                    model.family_at(z).map(|f| f.kendall_tau())
                })
                .collect::<Result<_>>()?;
            return ckt_measure(ckt, &taus);
        }
    };
    Ok(oracle::compute(&model, &OracleSpec::new(oracle_measure))?.value)
}

fn group_rows(
    cfg: &SimConfig,
    dgp: BuiltinModel,
    rep: usize,
    h: f64,
    data: &crate::copula::Dataset,
    design: &[Vec<f64>],
    truths: &BTreeMap<(BuiltinModel, MeasureVariant), f64>,
) -> Vec<SimResultRow> {
    let kernel = KernelSpec {
        kernel: cfg.kernel,
        h,
        scales: None,
    };
    let copula_aves: Vec<AveVariant> = {
        let mut v: Vec<AveVariant> = cfg.measures.iter().filter_map(|m| m.ave_variant).collect();
        v.sort();
        v.dedup();
        v
    };
    let wants_copula = cfg.measures.iter().any(|m| !m.measure.is_ckt());
    let wants_ckt = cfg.measures.iter().any(|m| m.measure.is_ckt());

    let start = Instant::now();
    let copula = wants_copula.then(|| {
        CopulaMeasures::compute(
            data,
            &kernel,
            cfg.u_grid,
            design,
            cfg.pseudo_z.unwrap_or(true),
            &copula_aves,
        )
    });
    let taus = wants_ckt.then(|| ckt_at_design(data, &kernel, design, cfg.pseudo_z.unwrap_or(false)));
    let elapsed_ms = if cfg.record_timings {
        start.elapsed().as_millis() as u64
    } else {
        0
    };

    cfg.measures
        .iter()
        .map(|&variant| {
            let estimate = if variant.measure.is_ckt() {
                match &taus {
                    Some(Ok(t)) => ckt_measure(variant.measure, t).ok(),
                    _ => None,
                }
            } else {
                match &copula {
                    Some(Ok(c)) => c.value(variant.measure, variant.ave()).ok(),
                    _ => None,
                }
            };
            SimResultRow {
                dgp,
                variant,
                h,
                rep,
                estimate: estimate.map(|v| v.max(0.0)),
                true_value: truths[&(dgp, variant)],
                elapsed_ms,
            }
        })
        .collect()
}

/// Runs every `(dgp, replication)` unit; replication `r` is sampled with seed `base_seed ^ r`.
/// Failed estimates are recorded as `None` rather than aborting the study.
pub fn run_study(cfg: &SimConfig) -> Result<Vec<SimResultRow>> {
    cfg.validate()?;
    let mut truths = BTreeMap::new();
    for &dgp in &cfg.dgps {
        for &m in &cfg.measures {
            truths.insert((dgp, m), true_value(dgp, m, cfg.n_design)?);
        }
    }
    let units: Vec<(BuiltinModel, usize)> = cfg
        .dgps
        .iter()
        .flat_map(|&dgp| (0..cfg.replications).map(move |r| (dgp, r)))
        .collect();
    let rows: Vec<Vec<SimResultRow>> = units
        .par_iter()
        .map(|&(dgp, rep)| -> Result<Vec<SimResultRow>> {
            let data = sample(&dgp.model(), cfg.n, cfg.base_seed ^ rep as u64)?;
            let design = default_design(&data, cfg.n_design)?;
            Ok(cfg
                .h_grid
                .iter()
                .flat_map(|&h| group_rows(cfg, dgp, rep, h, &data, &design, &truths))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dgp: BuiltinModel,
    pub variant: MeasureVariant,
    pub h: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub true_value: f64,
}

/// Median and quartiles (type 7) of the successful estimates per `(dgp, measure, ave_variant, h)`,
/// in order of first appearance.
pub fn summarize(rows: &[SimResultRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to summarize".into()));
    }
    let mut keys: Vec<(BuiltinModel, MeasureVariant, u64)> = Vec::new();
    let mut groups: BTreeMap<(BuiltinModel, MeasureVariant, u64), (Vec<f64>, f64)> = BTreeMap::new();
    for r in rows {
        let key = (r.dgp, r.variant, r.h.to_bits());
        let g = groups.entry(key).or_insert_with(|| {
            keys.push(key);
            (Vec::new(), r.true_value)
        });
        if let Some(e) = r.estimate {
            g.0.push(e);
        }
    }
    keys.into_iter()
        .map(|key| {
            let (mut est, true_value) = groups.remove(&key).expect("grouped");
            let (dgp, variant, h) = (key.0, key.1, f64::from_bits(key.2));
            if est.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "no successful estimates for {dgp} {} {} at h = {h}",
                    variant.measure,
                    variant.ave_label()
                )));
            }
            est.sort_by(f64::total_cmp);
            Ok(SummaryRow {
                dgp,
                variant,
                h,
                median: quantile_sorted(&est, 0.5),
                q25: quantile_sorted(&est, 0.25),
                q75: quantile_sorted(&est, 0.75),
                true_value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCell {
    pub variant: MeasureVariant,
    pub h: f64,
    pub nonsimplified: f64,
    pub simplified_max: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCheck {
    pub passed: bool,
    pub cells: Vec<SeparationCell>,
}

impl SeparationCheck {
    /// One-line description of the outcome.
    pub fn line(&self) -> String {
        let failed = self.cells.iter().filter(|c| !c.ok).count();
        let margin = self
            .cells
            .iter()
            .map(|c| c.nonsimplified - c.simplified_max)
            .fold(f64::INFINITY, f64::min);
        format!(
            "separation {}: {}/{} mid-grid cells with gauss_0.8z median above both simplified medians (smallest margin {margin:.6})",
            if self.passed { "PASS" } else { "FAIL" },
            self.cells.len() - failed,
            self.cells.len()
        )
    }
}

/// For each measure variant and each `h` in the middle third of the grid,
/// compares the median under the non-simplified model with the medians under
/// the simplified ones. `None` if the summary lacks either kind of model.
pub fn separation_check(cfg: &SimConfig, summary: &[SummaryRow]) -> Option<SeparationCheck> {
    let median = |dgp: BuiltinModel, v: MeasureVariant, h: f64| {
        summary
            .iter()
            .find(|s| s.dgp == dgp && s.variant == v && s.h == h)
            .map(|s| s.median)
    };
    let nonsimp: Vec<BuiltinModel> = cfg.dgps.iter().copied().filter(|d| !d.is_simplified()).collect();
    let simp: Vec<BuiltinModel> = cfg.dgps.iter().copied().filter(|d| d.is_simplified()).collect();
    if nonsimp.is_empty() || simp.is_empty() {
        return None;
    }
    let mut cells = Vec::new();
    for &variant in &cfg.measures {
        for &h in &cfg.h_grid[cfg.mid_h_indices()] {
            for &ns in &nonsimp {
                let a = median(ns, variant, h)?;
                let b = simp
                    .iter()
                    .map(|&s| median(s, variant, h))
                    .collect::<Option<Vec<f64>>>()?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                cells.push(SeparationCell {
                    variant,
                    h,
                    nonsimplified: a,
                    simplified_max: b,
                    ok: a > b,
                });
            }
        }
    }
    Some(SeparationCheck {
        passed: cells.iter().all(|c| c.ok),
        cells,
    })
}

const ROW_HEADER: [&str; 8] = [
    "dgp",
    "measure",
    "ave_variant",
    "h",
    "rep",
    "estimate",
    "true_value",
    "elapsed_ms",
];
const SUMMARY_HEADER: [&str; 8] = [
    "dgp",
    "measure",
    "ave_variant",
    "h",
    "median",
    "q25",
    "q75",
    "true_value",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_rows<W: Write>(rows: &[SimResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ROW_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.dgp.name().to_string(),
            r.variant.measure.name().to_string(),
            r.variant.ave_label().to_string(),
            r.h.to_string(),
            r.rep.to_string(),
            r.estimate.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            r.true_value.to_string(),
            r.elapsed_ms.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in summary {
        w.write_record([
            s.dgp.name().to_string(),
            s.variant.measure.name().to_string(),
            s.variant.ave_label().to_string(),
            s.h.to_string(),
            s.median.to_string(),
            s.q25.to_string(),
            s.q75.to_string(),
            s.true_value.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn records<R: Read>(reader: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let got = rdr.headers().map_err(csv_err)?;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Data(format!("expected header {}", header.join(","))));
    }
    rdr.records().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("row {row}: cannot parse field {}", i + 1)))
}

fn variant(rec: &csv::StringRecord) -> Result<MeasureVariant> {
    let measure: EstimatorMeasure = rec[1].parse()?;
    let ave_variant = match &rec[2] {
        "none" => None,
        s => Some(s.parse::<AveVariant>()?),
    };
    Ok(MeasureVariant { measure, ave_variant })
}

pub fn read_rows<R: Read>(reader: R) -> Result<Vec<SimResultRow>> {
    records(reader, &ROW_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(SimResultRow {
                dgp: rec[0].parse()?,
                variant: variant(rec)?,
                h: field(rec, 3, row)?,
                rep: field(rec, 4, row)?,
                estimate: if &rec[5] == "NA" {
                    None
                } else {
                    Some(field(rec, 5, row)?)
                },
                true_value: field(rec, 6, row)?,
                elapsed_ms: field(rec, 7, row)?,
            })
        })
        .collect()
}

pub fn read_summary<R: Read>(reader: R) -> Result<Vec<SummaryRow>> {
    records(reader, &SUMMARY_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(SummaryRow {
                dgp: rec[0].parse()?,
                variant: variant(rec)?,
                h: field(rec, 3, row)?,
                median: field(rec, 4, row)?,
                q25: field(rec, 5, row)?,
                q75: field(rec, 6, row)?,
                true_value: field(rec, 7, row)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            n: 200,
            replications: 2,
            h_grid: vec![0.2, 0.4],
            u_grid: 8,
            n_design: 5,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        let mut c = small();
        c.h_grid = vec![];
        assert!(c.validate().is_err());
        let mut c = small();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.measures = vec![MeasureVariant::new(EstimatorMeasure::Psi1Cvm, None)];
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<SimConfig>(r#"{"nn": 3}"#).is_err());
        assert_eq!(SimConfig::default().mid_h_indices(), 3..7);
    }

    #[test]
    fn cardinality_and_determinism() {
        let mut c = small();
        c.replications = 1;
        c.h_grid = vec![0.3];
        c.measures = vec![MeasureVariant::new(EstimatorMeasure::CktSupPairwise, None)];
        let rows = run_study(&c).unwrap();
        assert_eq!(rows.len(), 3);
        let c = small();
        let a = run_study(&c).unwrap();
        assert_eq!(a.len(), 3 * 2 * 2 * 6);
        assert_eq!(a, run_study(&c).unwrap());
        assert!(a.iter().all(|r| r.estimate.unwrap() >= 0.0));
    }

    #[test]
    fn summary_statistics() {
        let v = MeasureVariant::new(EstimatorMeasure::CktSupPairwise, None);
        let mk = |rep, e| SimResultRow {
            dgp: BuiltinModel::Indep,
            variant: v,
            h: 0.1,
            rep,
            estimate: e,
            true_value: 0.0,
            elapsed_ms: 0,
        };
        let s = summarize(&[mk(0, Some(0.3))]).unwrap();
        assert_eq!((s[0].median, s[0].q25, s[0].q75), (0.3, 0.3, 0.3));
        let s = summarize(&[mk(0, Some(1.0)), mk(1, Some(2.0)), mk(2, Some(4.0)), mk(3, None)]).unwrap();
        assert_eq!((s[0].median, s[0].q25, s[0].q75), (2.0, 1.5, 3.0));
        assert!(summarize(&[]).is_err());
        assert!(summarize(&[mk(0, None)]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let c = small();
        let mut rows = run_study(&c).unwrap();
        rows[0].estimate = None;
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        assert!(buf.starts_with(b"dgp,measure,ave_variant,h,rep,estimate,true_value,elapsed_ms\n"));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
        let s = summarize(&rows).unwrap();
        let mut buf = Vec::new();
        write_summary(&s, &mut buf).unwrap();
        assert_eq!(read_summary(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn ckt_true_values() {
        let v = MeasureVariant::new(EstimatorMeasure::CktSupPairwise, None);
        assert_eq!(true_value(BuiltinModel::Gauss05, v, 20).unwrap(), 0.0);
        let want = 2.0 * ((0.8 * 19.5 / 20.0f64).asin() - (0.8 * 0.5 / 20.0f64).asin()) / std::f64::consts::PI;
        assert!((true_value(BuiltinModel::Gauss08z, v, 20).unwrap() - want).abs() < 1e-14);
    }
}
