use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use semlink::adaptmod::{capacity_uniform, select_order, tau, thresholds, BetaAdjusters};
use semlink::bsec::{analytic_params, RobustnessProfile};
use semlink::constellation::{Constellation, ModOrder};
use semlink::demod::{a_from_rho, build_regions, demod_exact_llr, demod_robust, rho_from_a};
use semlink::harness::{
    load_idx, run_end_to_end, run_link_montecarlo, synth_dataset, Cell, ConfigFile, CsvTable, Dataset, EndToEndConfig,
    Modulation, RunRecord, SweepPoint,
};
use semlink::jscc::{load_bundle, save_bundle, train, Architecture, TrainingConfig};
use semlink::numerics::{q_function, q_inverse};
use semlink::{ChannelDistribution, Complex64, Error, RandomSource, Result};

use crate::args::*;

/// A finished command: its CSV and whether every internal check passed.
pub struct Outcome {
    pub table: CsvTable,
    pub failed_checks: usize,
}

impl From<CsvTable> for Outcome {
    fn from(table: CsvTable) -> Self {
        Outcome {
            table,
            failed_checks: 0,
        }
    }
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::SimulateBer(a) => simulate_ber(a).map(Into::into),
        Command::BsecTable(a) => bsec_table(a).map(Into::into),
        Command::DemodRegions(a) => demod_regions(a).map(Into::into),
        Command::AdaptivePlan(a) => adaptive_plan(a).map(Into::into),
        Command::Capacity(a) => capacity(a).map(Into::into),
        Command::Train(a) => train_cmd(a).map(Into::into),
        Command::Eval(a) => eval_cmd(a).map(Into::into),
        Command::Selfcheck(a) => selfcheck(a),
    }
}

pub fn output_path(cmd: &Command) -> Option<&Path> {
    let out = match cmd {
        Command::SimulateBer(a) => &a.output,
        Command::BsecTable(a) => &a.output,
        Command::DemodRegions(a) => &a.output,
        Command::AdaptivePlan(a) => &a.output,
        Command::Capacity(a) => &a.output,
        Command::Train(a) => &a.output,
        Command::Eval(a) => &a.output,
        Command::Selfcheck(a) => &a.output,
    };
    out.out.as_deref()
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Analytic value or NaN where the closed form does not apply.
fn analytic_or_nan(order: ModOrder, snr: f64, a: f64) -> (f64, f64, f64) {
    match analytic_params(order, snr, a) {
        Ok(p) => (p.mu, p.d, p.r),
        Err(_) => (f64::NAN, f64::NAN, f64::NAN),
    }
}

fn simulate_ber(args: &SimulateBerArgs) -> Result<CsvTable> {
    let root = RandomSource::new(args.seed);
    let mut t = CsvTable::new(&[
        "order",
        "a",
        "snr_db",
        "flip_rate",
        "erasure_rate",
        "analytic_mu",
        "analytic_d",
        "n_bits",
    ]);
    let mut k = 0;
    for &m in &args.order {
        let order = ModOrder::from_bits(m)?;
        for &snr_db in &args.snr_db {
            let stats = run_link_montecarlo(order, snr_db, args.a, args.bits, &mut root.fork(k))?;
            k += 1;
            let (mu, d, _) = analytic_or_nan(order, db_to_linear(snr_db), args.a);
            t.push(vec![
                m.into(),
                args.a.into(),
                snr_db.into(),
                stats.params.mu.into(),
                stats.params.d.into(),
                mu.into(),
                d.into(),
                stats.counts.total().into(),
            ])?;
        }
    }
    Ok(t)
}

fn bsec_table(args: &BsecTableArgs) -> Result<CsvTable> {
    let order = ModOrder::from_bits(args.order)?;
    let root = RandomSource::new(args.seed);
    let mut t = CsvTable::new(&[
        "snr_db",
        "mu",
        "d",
        "r",
        "empirical_mu",
        "empirical_d",
        "empirical_r",
        "n_bits",
    ]);
    for (k, &snr_db) in args.snr_db.iter().enumerate() {
        let stats = run_link_montecarlo(order, snr_db, args.a, args.bits, &mut root.fork(k as u64))?;
        let (mu, d, r) = analytic_or_nan(order, db_to_linear(snr_db), args.a);
        t.push(vec![
            snr_db.into(),
            mu.into(),
            d.into(),
            r.into(),
            stats.params.mu.into(),
            stats.params.d.into(),
            stats.params.r.into(),
            stats.counts.total().into(),
        ])?;
    }
    Ok(t)
}

fn demod_regions(args: &DemodRegionsArgs) -> Result<CsvTable> {
    let c = Constellation::new(ModOrder::from_bits(args.order)?);
    let offsets = match args.a.len() {
        1 => vec![args.a[0]; c.bits()],
        _ => args.a.clone(),
    };
    let regions = build_regions(&c, &offsets)?;
    let unit = if args.in_dmin { c.d_min() } else { 1.0 };
    let mut t = CsvTable::new(&["bit", "output", "lower", "upper"]);
    for (i, b) in regions.bits().iter().enumerate() {
        for iv in &b.intervals {
            t.push(vec![
                (i + 1).into(),
                iv.output.to_string().into(),
                (iv.lower / unit).into(),
                (iv.upper / unit).into(),
            ])?;
        }
    }
    Ok(t)
}

fn betas(set: BetaSet) -> BetaAdjusters {
    match set {
        BetaSet::Homogeneous => BetaAdjusters::homogeneous(),
        BetaSet::Heterogeneous => BetaAdjusters::heterogeneous(),
    }
}

/// Profile from a file, a uniform level or a linear ramp; `default` when
/// none is given.
fn resolve_profile(
    p: &ProfileArgs,
    n: usize,
    default: impl FnOnce(usize) -> RobustnessProfile,
) -> Result<RobustnessProfile> {
    let profile = match (&p.profile, p.alpha, p.alpha_first, p.alpha_last) {
        (Some(path), None, None, None) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            RobustnessProfile::parse(&text)?
        }
        (None, Some(alpha), None, None) => RobustnessProfile::uniform(n, alpha, p.a)?,
        (None, None, Some(first), Some(last)) => RobustnessProfile::linear(n, first, last, p.a)?,
        (None, None, None, None) => default(n),
        _ => {
            return Err(Error::Config(
                "give exactly one of --profile, --alpha, or --alpha-first with --alpha-last".into(),
            ))
        }
    };
    if profile.len() != n {
        return Err(Error::Config(format!(
            "profile covers {} bits, expected {n}",
            profile.len()
        )));
    }
    Ok(profile)
}

fn adaptive_plan(args: &AdaptivePlanArgs) -> Result<CsvTable> {
    let n = match &args.profile.profile {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            RobustnessProfile::parse(&text)?.len()
        }
        None => args.latent_bits,
    };
    let profile = resolve_profile(&args.profile, n, RobustnessProfile::heterogeneous)?;
    let betas = betas(args.betas);
    let mut t = CsvTable::new(&["bit", "alpha", "tau2", "tau4", "tau6", "order"]);
    for (i, (&alpha, &a)) in profile.alphas().iter().zip(profile.a_offsets()).enumerate() {
        let [t2, t4, t6] = thresholds(alpha, a, &betas)?;
        let order: Cell = match args.snr_db {
            Some(db) => select_order(db_to_linear(db), alpha, a, &betas)?.order.bits().into(),
            None => "".into(),
        };
        t.push(vec![
            (i + 1).into(),
            alpha.into(),
            t2.into(),
            t4.into(),
            t6.into(),
            order,
        ])?;
    }
    Ok(t)
}

fn capacity(args: &CapacityArgs) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["g1", "g2", "capacity"]);
    t.push(vec![
        args.g1.into(),
        args.g2.into(),
        capacity_uniform(args.g1, args.g2)?.into(),
    ])?;
    Ok(t)
}

/// Training and test portions of the selected data.
fn load_data(d: &DataArgs) -> Result<(Dataset, Dataset)> {
    if !(d.train_fraction > 0.0 && d.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} must lie strictly between 0 and 1",
            d.train_fraction
        )));
    }
    let all = match (&d.images, &d.labels) {
        (Some(images), Some(labels)) => load_idx(images, labels)?,
        _ => synth_dataset(
            d.classes,
            d.dim,
            d.per_class,
            d.noise,
            &mut RandomSource::new(d.data_seed),
        )?,
    };
    let n_train = (all.len() as f64 * d.train_fraction).round() as usize;
    Ok(all.split(n_train))
}

fn train_cmd(args: &TrainArgs) -> Result<CsvTable> {
    let (train_set, _) = load_data(&args.data)?;
    let profile = resolve_profile(&args.profile, args.latent_bits, RobustnessProfile::homogeneous)?;
    let mut cfg = TrainingConfig::new(profile);
    cfg.epochs = args.epochs;
    cfg.warmup_epochs = args.warmup;
    cfg.batch_size = args.batch;
    cfg.learning_rate = args.lr;
    cfg.lambda = args.lambda;
    cfg.seed = args.seed;
    let out = train(&train_set, &Architecture::dense(args.latent_bits), &cfg)?;
    save_bundle(&args.model_out, &out.models)?;
    let mut t = CsvTable::new(&["epoch", "warmup", "loss", "mse", "ce", "accuracy"]);
    for e in &out.history {
        t.push(vec![
            e.epoch.into(),
            usize::from(e.warmup).into(),
            e.loss.into(),
            e.mse.into(),
            e.ce.into(),
            e.accuracy.into(),
        ])?;
    }
    Ok(t)
}

fn unix_now() -> Option<u64> {
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn eval_cmd(args: &EvalArgs) -> Result<CsvTable> {
    let started = unix_now();
    let models = load_bundle(&args.model)?;
    let (_, test) = load_data(&args.data)?;
    let profile = resolve_profile(&args.profile, models.latent_bits(), RobustnessProfile::heterogeneous)?;
    let modulation = match args.mode {
        ModeArg::Adaptive => Modulation::Adaptive(betas(args.betas)),
        ModeArg::Fixed => Modulation::Fixed(ModOrder::from_bits(args.order)?),
    };
    let points: Vec<(f64, ChannelDistribution)> = if args.snr_db.is_empty() {
        let mean_snr = (args.g1 * args.g1 + args.g1 * args.g2 + args.g2 * args.g2) / 3.0;
        vec![(
            10.0 * mean_snr.log10(),
            ChannelDistribution::uniform_magnitude(args.g1, args.g2),
        )]
    } else {
        args.snr_db
            .iter()
            .map(|&db| (db, ChannelDistribution::fixed_snr(db_to_linear(db))))
            .collect()
    };

    let mut snapshot = ConfigFile::default();
    snapshot.insert("model", args.model.display().to_string());
    snapshot.insert("mode", format!("{:?}", args.mode).to_lowercase());
    snapshot.insert("order", args.order.to_string());
    snapshot.insert("betas", format!("{:?}", args.betas).to_lowercase());
    snapshot.insert("block_len", args.block_len.to_string());
    snapshot.insert("g1", args.g1.to_string());
    snapshot.insert("g2", args.g2.to_string());
    let snrs: Vec<String> = args.snr_db.iter().map(f64::to_string).collect();
    snapshot.insert("snr_db", snrs.join(","));
    snapshot.insert("data_seed", args.data.data_seed.to_string());
    let mut record = RunRecord::new(snapshot, args.seed);
    record.started_unix = started;

    let root = RandomSource::new(args.seed);
    for (k, (snr_db, dist)) in points.into_iter().enumerate() {
        let mut cfg = EndToEndConfig::new(dist, profile.clone(), modulation.clone());
        cfg.block_len = args.block_len;
        let m = run_end_to_end(&models, &cfg, &test, &mut root.fork(k as u64))?;
        record.points.push(SweepPoint {
            snr_db,
            ber: m.flip_rate,
            erasure_rate: m.erasure_rate,
            accuracy: m.accuracy,
            mse: m.mse,
            spectral_efficiency: m.spectral_efficiency,
        });
    }
    record.finished_unix = unix_now();
    if let Some(path) = &args.record {
        std::fs::write(path, record.metadata()).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(record.table())
}

fn selfcheck(args: &SelfcheckArgs) -> Result<Outcome> {
    let mut t = CsvTable::new(&["check", "value", "expected", "tolerance", "pass"]);
    let mut failed = 0;
    let mut check = |name: &str, value: f64, expected: f64, tol: f64| -> Result<()> {
        let pass = (value - expected).abs() <= tol;
        failed += usize::from(!pass);
        t.push(vec![
            name.into(),
            value.into(),
            expected.into(),
            tol.into(),
            usize::from(pass).into(),
        ])
    };

    check("q_function(1)", q_function(1.0)?, 0.158655253931457, 1e-12)?;
    check("q_inverse(Q(1.5))", q_inverse(0.0668072012688581)?, 1.5, 1e-8)?;
    check("capacity(0.37,2.5)", capacity_uniform(0.37, 2.5)?, 1.57, 0.005)?;
    check(
        "a_from_rho(snr,4QAM,snr)",
        a_from_rho(1.0, ModOrder::Qam4, 1.0)?,
        0.5,
        0.0,
    )?;
    check(
        "tau_4QAM(alpha=0.4,homogeneous)",
        tau(ModOrder::Qam4, 0.4, 0.5, &BetaAdjusters::homogeneous())?,
        0.42079,
        1e-4,
    )?;

    let root = RandomSource::new(args.seed);
    let n = 200_000;
    let stats = run_link_montecarlo(ModOrder::Qam4, 0.0, 0.5, n, &mut root.fork(0))?;
    let mu = q_function(1.5)?;
    let d = q_function(0.5)? - mu;
    let nb = stats.counts.total() as f64;
    check(
        "link_flip(4QAM,a=0.5,0dB)",
        stats.params.mu,
        mu,
        4.0 * (mu * (1.0 - mu) / nb).sqrt(),
    )?;
    check(
        "link_erasure(4QAM,a=0.5,0dB)",
        stats.params.d,
        d,
        4.0 * (d * (1.0 - d) / nb).sqrt(),
    )?;

    let mut rng = root.fork(1);
    let mut disagreements = 0usize;
    for order in ModOrder::ALL {
        let c = Constellation::new(order);
        let snr = 2.0;
        let regions = build_regions(&c, &vec![0.5; c.bits()])?;
        let rho = vec![rho_from_a(0.5, order, snr)?; c.bits()];
        let ys: Vec<Complex64> = (0..10_000)
            .map(|_| Complex64::new(2.4 * rng.unit() - 1.2, 2.4 * rng.unit() - 1.2))
            .collect();
        let a = demod_robust(&ys, &regions);
        let b = demod_exact_llr(&ys, &c, snr, &rho)?;
        disagreements += a.iter().zip(&b).filter(|(x, y)| x != y).count();
    }
    check("demod_disagreements", disagreements as f64, 0.0, 0.0)?;

    Ok(Outcome {
        table: t,
        failed_checks: failed,
    })
}
