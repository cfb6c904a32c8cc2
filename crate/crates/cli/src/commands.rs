use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use nonsimplify_core::copula::{sample_gaussian_vector, sample_nonsimplified_trivariate};
use nonsimplify_core::estimators::estimate_measure;
use nonsimplify_core::io::{read_dataset_file, require_columns, write_dataset};
use nonsimplify_core::sim::{run_study, separation_check, summarize, write_rows, write_summary};
use nonsimplify_core::vines::{default_edge_spec, enumerate_vines, vine_scores};
use nonsimplify_core::{
    oracle, Aggregation, AveVariant, BuiltinModel, Dataset, EstimatorMeasure, EstimatorSpec, Kernel, KernelSpec,
    OracleMeasure, OracleSpec, SimConfig,
};

use crate::config::{emit, flag, resolve, to_json};
use crate::{Failure, GlobalOpts};

#[derive(Args)]
pub struct OracleArgs {
    /// indep, gauss_0_5 or gauss_0.8z.
    #[arg(long)]
    model: Option<BuiltinModel>,
    /// psi1_cvm, psi1_ks, psi0_cvm, psi0_ks, param_sup or param_avg.
    #[arg(long)]
    measure: Option<OracleMeasure>,
    #[arg(long)]
    u_grid: Option<usize>,
    #[arg(long)]
    z_grid: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct OracleConfig {
    model: BuiltinModel,
    #[serde(flatten)]
    spec: OracleSpec,
}

pub fn oracle(g: &GlobalOpts, a: OracleArgs) -> Result<(), Failure> {
    let defaults = OracleConfig {
        model: BuiltinModel::Gauss08z,
        spec: OracleSpec::default(),
    };
    let flags = [
        flag("model", &a.model),
        flag("measure", &a.measure),
        flag("u_grid", &a.u_grid),
        flag("z_grid", &a.z_grid),
    ];
    let cfg: OracleConfig = resolve(&defaults, g, flags.into_iter().flatten().collect())?;
    let value = oracle::compute(&cfg.model.model(), &cfg.spec)?;
    emit(g.output.as_deref(), &to_json(&value)?)
}

#[derive(Args)]
pub struct EstimateArgs {
    /// CSV with columns x1,x2,z1[,z2,...].
    #[arg(long)]
    data: Option<PathBuf>,
    /// psi1_cvm, psi1_ks, psi0_tilde_cvm, psi0_tilde_ks, ckt_sup_pairwise, ckt_sum_pairwise or ckt_dist_to_average.
    #[arg(long)]
    measure: Option<EstimatorMeasure>,
    /// Bandwidth.
    #[arg(long)]
    h: Option<f64>,
    /// cs3 or cs4.
    #[arg(long)]
    ave_variant: Option<AveVariant>,
    /// epanechnikov, gaussian or uniform.
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long)]
    u_grid: Option<usize>,
    #[arg(long)]
    n_design: Option<usize>,
    /// Smooth on ranks of Z (true) or raw values (false).
    #[arg(long)]
    pseudo_z: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct EstimateConfig {
    data: Option<PathBuf>,
    h: Option<f64>,
    kernel: Kernel,
    scales: Option<Vec<f64>>,
    #[serde(flatten)]
    spec: EstimatorSpec,
}

fn kernel_spec(kernel: Kernel, h: Option<f64>, scales: Option<Vec<f64>>) -> Result<KernelSpec, Failure> {
    let h = h.ok_or_else(|| Failure::user("a bandwidth is required (--h or --set h=...)"))?;
    let spec = KernelSpec::new(kernel, h)?;
    Ok(match scales {
        Some(s) => spec.with_scales(s)?,
        None => spec,
    })
}

fn load(path: Option<&Path>) -> Result<Dataset, Failure> {
    let path = path.ok_or_else(|| Failure::user("a data file is required (--data or --set data=...)"))?;
    Ok(read_dataset_file(path)?)
}

pub fn estimate(g: &GlobalOpts, a: EstimateArgs) -> Result<(), Failure> {
    let defaults = EstimateConfig {
        data: None,
        h: None,
        kernel: Kernel::default(),
        scales: None,
        spec: EstimatorSpec::default(),
    };
    let flags = [
        flag("data", &a.data),
        flag("measure", &a.measure),
        flag("h", &a.h),
        flag("ave_variant", &a.ave_variant),
        flag("kernel", &a.kernel),
        flag("u_grid", &a.u_grid),
        flag("n_design", &a.n_design),
        flag("pseudo_z", &a.pseudo_z.map(Some)),
    ];
    let cfg: EstimateConfig = resolve(&defaults, g, flags.into_iter().flatten().collect())?;
    let kernel = kernel_spec(cfg.kernel, cfg.h, cfg.scales)?;
    let data = load(cfg.data.as_deref())?;
    require_columns(&data, 2, 1)?;
    let est = estimate_measure(&data, &cfg.spec, &kernel)?;
    emit(g.output.as_deref(), &to_json(&est)?)
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
}

pub fn simulate(g: &GlobalOpts, a: SimulateArgs) -> Result<(), Failure> {
    let flags = [
        flag("replications", &a.replications),
        flag("n", &a.n),
        flag("base_seed", &a.base_seed),
    ];
    let cfg: SimConfig = resolve(&SimConfig::default(), g, flags.into_iter().flatten().collect())?;
    cfg.validate()?;
    let dir = g.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Failure::user(format!("{}: {e}", dir.display())))?;
    let rows = run_study(&cfg)?;
    let summary = summarize(&rows)?;
    let create = |name: &str| {
        let p = dir.join(name);
        fs::File::create(&p).map_err(|e| Failure::user(format!("{}: {e}", p.display())))
    };
    write_rows(&rows, create("rows.csv")?)?;
    write_summary(&summary, create("summary.csv")?)?;
    match separation_check(&cfg, &summary) {
        Some(check) => println!("{}", check.line()),
        None => println!("separation check: not applicable (needs gauss_0.8z and a simplified dgp)"),
    }
    Ok(())
}

#[derive(Args)]
pub struct VineScoreArgs {
    /// CSV with columns x1..xd.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the first d columns (default: all).
    #[arg(long)]
    d: Option<usize>,
    /// sum, max or norm:<q>.
    #[arg(long)]
    aggregation: Option<Aggregation>,
    /// Bandwidth before per-edge scaling.
    #[arg(long)]
    h: Option<f64>,
    /// ckt_sup_pairwise, ckt_sum_pairwise or ckt_dist_to_average.
    #[arg(long)]
    measure: Option<EstimatorMeasure>,
    #[arg(long)]
    kernel: Option<Kernel>,
    #[arg(long)]
    n_design: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct VineConfig {
    data: Option<PathBuf>,
    d: Option<usize>,
    aggregation: Aggregation,
    h: Option<f64>,
    kernel: Kernel,
    memoize: bool,
    #[serde(flatten)]
    spec: EstimatorSpec,
}

pub fn vine_score(g: &GlobalOpts, a: VineScoreArgs) -> Result<(), Failure> {
    let defaults = VineConfig {
        data: None,
        d: None,
        aggregation: Aggregation::Sum,
        h: None,
        kernel: Kernel::default(),
        memoize: true,
        spec: default_edge_spec(),
    };
    let flags = [
        flag("data", &a.data),
        flag("d", &a.d.map(Some)),
        flag("aggregation", &a.aggregation),
        flag("h", &a.h),
        flag("measure", &a.measure),
        flag("kernel", &a.kernel),
        flag("n_design", &a.n_design),
    ];
    let cfg: VineConfig = resolve(&defaults, g, flags.into_iter().flatten().collect())?;
    let kernel = kernel_spec(cfg.kernel, cfg.h, None)?;
    if let Some(d) = cfg.d {
        if d < 2 {
            return Err(Failure::user(format!("d must be at least 2, got {d}")));
        }
        // Fail on the dimension before touching the data file.
        enumerate_vines(d)?;
    }
    let mut data = load(cfg.data.as_deref())?;
    if let Some(d) = cfg.d {
        require_columns(&data, d, 0)?;
        if data.d() > d {
            data = Dataset::from_columns(data.x_columns()[..d].to_vec(), data.z_columns().to_vec())?;
        }
    }
    let report = vine_scores(&data, cfg.aggregation, &cfg.spec, &kernel, cfg.memoize)?;
    emit(g.output.as_deref(), &to_json(&report)?)
}

#[derive(Args)]
pub struct EnumerateArgs {
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct EnumerateConfig {
    d: usize,
}

pub fn enumerate(g: &GlobalOpts, a: EnumerateArgs) -> Result<(), Failure> {
    let cfg: EnumerateConfig = resolve(&EnumerateConfig { d: 3 }, g, flag("d", &a.d).into_iter().collect())?;
    let vines = enumerate_vines(cfg.d)?;
    emit(g.output.as_deref(), &to_json(&vines)?)
}

#[derive(Args)]
pub struct SampleArgs {
    /// A built-in model, `trivariate` (x2, x3 given x1 with correlation 0.9 (2 x1 - 1)),
    /// or `gaussian` (needs --set corr=[[...]]).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct SampleConfig {
    model: String,
    n: usize,
    seed: u64,
    corr: Option<Vec<Vec<f64>>>,
}

fn draw(cfg: &SampleConfig) -> Result<Dataset, Failure> {
    match cfg.model.as_str() {
        "trivariate" => Ok(sample_nonsimplified_trivariate(cfg.n, cfg.seed)?),
        "gaussian" => {
            let corr = cfg.corr.as_ref().ok_or_else(|| {
                Failure::user("model gaussian needs a correlation matrix (--set corr=[[1,0.5],[0.5,1]])")
            })?;
            Ok(sample_gaussian_vector(corr, cfg.n, cfg.seed)?)
        }
        name => {
            let model: BuiltinModel = name.parse()?;
            Ok(nonsimplify_core::sample(&model.model(), cfg.n, cfg.seed)?)
        }
    }
}

pub fn sample(g: &GlobalOpts, a: SampleArgs) -> Result<(), Failure> {
    let defaults = SampleConfig {
        model: BuiltinModel::Gauss08z.name().to_string(),
        n: 500,
        seed: 1,
        corr: None,
    };
    let flags = [flag("model", &a.model), flag("n", &a.n), flag("seed", &a.seed)];
    let cfg: SampleConfig = resolve(&defaults, g, flags.into_iter().flatten().collect())?;
    let data = draw(&cfg)?;
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    let text = String::from_utf8(buf).expect("CSV output is UTF-8");
    emit(g.output.as_deref(), &text)
}
