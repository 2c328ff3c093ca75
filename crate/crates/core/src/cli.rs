//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 on input errors, 2 on numerical failures. Failures are
//! reported on stderr as one `ERR:<code>:<message>` line.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::cpa_net::CpaNetwork;
use crate::density::{density_at_latent, density_at_point, pushforward_entropy, LatentPrior, ON_MANIFOLD_TOL};
use crate::diagnostics::{
    default_epsilon, epsball_counts, estimate_region_bins, gmm_loglik, lipschitz_estimate,
    uniformity_chi2, Binning, LipschitzSampler, EPSILON_MULTIPLIERS,
};
use crate::error::{Error, Result};
use crate::geometry::VolumePolicy;
use crate::model_io::{load_model, make_toy, save_model, write_report, write_samples, ModelFile, Report, ToySpec};
use crate::sampling::{
    build_pool, magnet_sample, rejection_sample, standard_sample, LatentDomain, RejectionConfig,
    SampleBatch, SamplerConfig, Weighting,
};

#[derive(Parser, Debug)]
#[command(name = "magnet", version, about = "Volume-weighted sampling on piecewise-affine generators")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a toy model file.
    GenToy {
        /// two-region:NEG,POS | triangle[:SPLIT] | random:S,D,W1xW2,SEED[,ALPHA] | lipschitz-probe
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples (volume-weighted by default).
    Sample {
        #[command(flatten)]
        common: Common,
        /// magnet | standard | rejection
        #[arg(long, default_value = "magnet")]
        sampler: String,
    },
    /// Density of the generated distribution at a point.
    Density {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "gaussian")]
        domain: String,
        /// Output point, or a latent point with `--latent`.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        latent: bool,
        /// Latent draws used to find candidate regions.
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo differential entropy of the generated distribution.
    Entropy {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "gaussian")]
        domain: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Epsilon-ball concentration counts, standard vs volume-weighted.
    Epsball {
        #[command(flatten)]
        common: Common,
        /// Absolute radius; defaults to the mean nearest-neighbour distance.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Reference CSV (uses its x_ columns if present).
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Reference size when no file is given.
        #[arg(long, default_value_t = 2000)]
        m: usize,
    },
    /// GMM log-likelihood, standard vs volume-weighted.
    Gmm {
        #[command(flatten)]
        common: Common,
        /// `2-10`, `3` or `2,4,6`
        #[arg(long, default_value = "2-10")]
        components: String,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
    },
    /// Running-max Jacobian norm traces, standard vs volume-weighted.
    Lipschitz {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
    /// Chi-square test of uniformity on the manifold.
    Uniformity {
        #[command(flatten)]
        common: Common,
        /// regions[:DRAWS] | intervals:COUNT
        #[arg(long, default_value = "regions")]
        bins: String,
        #[arg(long, default_value = "magnet")]
        sampler: String,
    },
    /// Sweep the pool size and report weight stability and uniformity.
    PoolStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pool sizes.
        #[arg(long, default_value = "1000,10000,100000")]
        ns: String,
        /// Seeds per pool size.
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value = "regions")]
        bins: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pool size.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Sample count.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// uniform:LO,HI | gaussian
    #[arg(long, default_value = "uniform:-1,1")]
    domain: String,
    /// proportional | softmax:T
    #[arg(long, default_value = "proportional")]
    weighting: String,
    /// exact | proj:D,K
    #[arg(long, default_value = "exact")]
    volume: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            if code != 0 {
                let first = e.to_string().lines().next().unwrap_or("").to_string();
                eprintln!("ERR:usage:{}", first.trim_start_matches("error: "));
            }
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be positive")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ERR:{}:{}", e.code(), e.to_string().replace('\n', " "));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn parse_f64s(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("{what}: cannot parse '{t}' as a number")))
        })
        .collect()
}

fn parse_toy(kind: &str) -> Result<ToySpec> {
    let (name, args) = kind.split_once(':').unwrap_or((kind, ""));
    let bad = || Error::invalid(format!("unknown toy kind '{kind}'"));
    match name {
        "two-region" => {
            let v = parse_f64s(args, "two-region slopes")?;
            if v.len() != 2 {
                return Err(bad());
            }
            Ok(ToySpec::TwoRegion1D {
                slope_neg: v[0],
                slope_pos: v[1],
            })
        }
        "triangle" if args.is_empty() => Ok(ToySpec::biased_triangle()),
        "triangle" => {
            let v = parse_f64s(args, "triangle split")?;
            if v.len() != 1 {
                return Err(bad());
            }
            Ok(ToySpec::TriangularSupport2D { split: v[0] })
        }
        "random" => {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() < 4 || parts.len() > 5 {
                return Err(bad());
            }
            let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
            let widths = parts[2]
                .split('x')
                .map(|w| w.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            let seed = parts[3].trim().parse::<u64>().map_err(|_| bad())?;
            let alpha = match parts.get(4) {
                Some(a) => a.trim().parse::<f64>().map_err(|_| bad())?,
                None => 0.0,
            };
            Ok(ToySpec::RandomCpa {
                latent_dim: int(parts[0])?,
                output_dim: int(parts[1])?,
                widths,
                seed,
                alpha,
            })
        }
        "lipschitz-probe" => Ok(ToySpec::lipschitz_probe()),
        _ => Err(bad()),
    }
}

fn parse_domain(s: &str, dim: usize) -> Result<LatentDomain> {
    let (name, args) = s.split_once(':').unwrap_or((s, ""));
    match name {
        "uniform" => {
            let v = parse_f64s(args, "uniform domain")?;
            if v.len() != 2 {
                return Err(Error::invalid("uniform domain takes lo,hi"));
            }
            let d = LatentDomain::UniformBox {
                lo: vec![v[0]; dim],
                hi: vec![v[1]; dim],
            };
            d.validate(dim)?;
            Ok(d)
        }
        "gaussian" if args.is_empty() => Ok(LatentDomain::standard_gaussian(dim)),
        _ => Err(Error::invalid(format!("unknown domain '{s}'"))),
    }
}

fn prior_for(domain: &LatentDomain) -> Result<LatentPrior> {
    match domain {
        LatentDomain::UniformBox { lo, hi } => Ok(LatentPrior::UniformBox {
            lo: lo.clone(),
            hi: hi.clone(),
        }),
        LatentDomain::Gaussian { mean, std }
            if mean.iter().all(|m| *m == 0.0) && std.iter().all(|s| *s == 1.0) =>
        {
            Ok(LatentPrior::StandardGaussian { dim: mean.len() })
        }
        _ => Err(Error::invalid("density needs a uniform box or standard gaussian domain")),
    }
}

fn parse_weighting(s: &str) -> Result<Weighting> {
    match s.split_once(':') {
        None if s == "proportional" => Ok(Weighting::Proportional),
        Some(("softmax", t)) => {
            let temperature = t
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad softmax temperature '{t}'")))?;
            Ok(Weighting::Softmax { temperature })
        }
        _ => Err(Error::invalid(format!("unknown weighting '{s}'"))),
    }
}

fn parse_volume(s: &str, seed: u64) -> Result<VolumePolicy> {
    match s.split_once(':') {
        None if s == "exact" => Ok(VolumePolicy::ExactSvd),
        Some(("proj", args)) => {
            let v: Vec<usize> = args
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::invalid(format!("bad projection spec '{s}'")))?;
            if v.len() != 2 {
                return Err(Error::invalid("projected volume takes proj:D,K"));
            }
            Ok(VolumePolicy::ProjectedTopK {
                d_proj: v[0],
                k: v[1],
                seed,
            })
        }
        _ => Err(Error::invalid(format!("unknown volume policy '{s}'"))),
    }
}

/// Loaded model plus the resolved sampler settings shared by most commands.
struct Setup {
    net: CpaNetwork,
    config: SamplerConfig,
}

fn setup(c: &Common) -> Result<Setup> {
    let net = load_model(&c.model)?;
    let domain = parse_domain(&c.domain, net.latent_dim())?;
    let mut config = SamplerConfig::new(domain, c.n, c.k, c.seed);
    config.weighting = parse_weighting(&c.weighting)?;
    config.volume_policy = parse_volume(&c.volume, c.seed)?;
    Ok(Setup { net, config })
}

fn common_config(c: &Common, s: &Setup) -> Value {
    json!({
        "model": c.model,
        "seed": c.seed,
        "n": c.n,
        "k": c.k,
        "domain": s.config.domain,
        "weighting": s.config.weighting,
        "volume": s.config.volume_policy,
    })
}

/// Writes a line to stdout, ignoring a closed pipe.
fn emit(line: impl std::fmt::Display) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn announce(command: &str, config: &Value) {
    emit(format_args!("config {}", json!({ "command": command, "settings": config })));
}

fn finish(command: &str, config: Value, results: Value, out: Option<&Path>) -> Result<()> {
    emit(serde_json::to_string_pretty(&results).expect("results serialise"));
    if let Some(path) = out {
        write_report(&Report::new(command, config, results), path)?;
    }
    Ok(())
}

fn draw(s: &Setup, sampler: &str, seed: u64) -> Result<SampleBatch> {
    match sampler {
        "standard" => standard_sample(&s.net, &s.config.domain, s.config.sample_count, seed),
        "magnet" => {
            let pool = build_pool(&s.net, &s.config)?;
            magnet_sample(&s.net, &pool, s.config.sample_count, seed)
        }
        "rejection" => {
            let pool = build_pool(&s.net, &s.config)?;
            let rc = RejectionConfig {
                volume_policy: s.config.volume_policy,
                ..RejectionConfig::default()
            };
            rejection_sample(&s.net, &s.config.domain, pool.log_sigmas(), s.config.sample_count, seed, &rc)
        }
        other => Err(Error::invalid(format!("unknown sampler '{other}'"))),
    }
}

fn parse_bins(spec: &str, s: &Setup) -> Result<Binning> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let count = |default: usize| -> Result<usize> {
        if arg.is_empty() {
            return Ok(default);
        }
        arg.parse::<usize>()
            .map_err(|_| Error::invalid(format!("bad bin spec '{spec}'")))
    };
    match name {
        "regions" => {
            let draws = count(200_000)?;
            Ok(Binning::Regions(estimate_region_bins(
                &s.net,
                &s.config.domain,
                draws,
                s.config.seed ^ 0x5eed,
            )?))
        }
        "intervals" => {
            if s.net.latent_dim() != 1 || s.net.output_dim() != 1 {
                return Err(Error::invalid("interval bins need a 1 -> 1 net"));
            }
            let LatentDomain::UniformBox { lo, hi } = &s.config.domain else {
                return Err(Error::invalid("interval bins need a uniform latent box"));
            };
            let bins = count(10)?;
            if bins == 0 {
                return Err(Error::invalid("interval count must be positive"));
            }
            let (lo, hi) = (lo[0], hi[0]);
            // the image of an interval is an interval spanned by endpoint and
            // breakpoint values; a fine scan recovers it
            let steps = 1_000_000;
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..=steps {
                let z = lo + (hi - lo) * i as f64 / steps as f64;
                let x = s.net.forward_unchecked(&[z])[0];
                a = a.min(x);
                b = b.max(x);
            }
            let edges = (0..=bins).map(|i| a + (b - a) * i as f64 / bins as f64).collect();
            Ok(Binning::Intervals {
                edges,
                support: (a, b),
            })
        }
        _ => Err(Error::invalid(format!("unknown bin spec '{spec}'"))),
    }
}

/// Points from a CSV file: the `x_` columns when the header has them,
/// otherwise every column. A header row is detected by non-numeric cells.
fn read_points_csv(path: &Path) -> Result<DMatrix<f64>> {
    let bad = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::invalid(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut columns: Option<Vec<usize>> = None;
    let mut width = None;
    for rec in reader.records() {
        let rec = rec.map_err(bad)?;
        let numeric: Option<Vec<f64>> = rec.iter().map(|c| c.trim().parse().ok()).collect();
        let row = match (numeric, rows.is_empty() && columns.is_none()) {
            (None, true) => {
                let xs: Vec<usize> = rec
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.trim().starts_with("x_"))
                    .map(|(i, _)| i)
                    .collect();
                columns = Some(if xs.is_empty() { (0..rec.len()).collect() } else { xs });
                continue;
            }
            (None, false) => {
                return Err(Error::invalid(format!(
                    "{}: non-numeric row {}",
                    path.display(),
                    rows.len() + 1
                )))
            }
            (Some(v), _) => match &columns {
                Some(cols) => cols.iter().map(|&c| v[c]).collect(),
                None => v,
            },
        };
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::invalid(format!("{}: ragged rows", path.display())));
        }
        rows.push(row);
    }
    let Some(d) = width else {
        return Err(Error::invalid(format!("{}: no points", path.display())));
    };
    Ok(DMatrix::from_row_slice(rows.len(), d, &rows.concat()))
}

fn parse_components(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::invalid(format!("bad component list '{s}'"));
    if let Some((a, b)) = s.split_once('-') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().ok().filter(|v| *v > 0).ok_or_else(bad))
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenToy { kind, out } => {
            let spec = parse_toy(&kind)?;
            announce("gen-toy", &json!({ "kind": kind, "spec": spec, "out": out }));
            let net = make_toy(&spec)?;
            match out {
                Some(path) => {
                    save_model(&net, &path)?;
                    emit(format_args!("wrote {}", path.display()));
                }
                None => emit(ModelFile::from_network(&net).to_json().trim_end()),
            }
            Ok(())
        }
        Command::Sample { common, sampler } => {
            let s = setup(&common)?;
            let mut config = common_config(&common, &s);
            config["sampler"] = json!(sampler);
            announce("sample", &config);
            let batch = draw(&s, &sampler, common.seed)?;
            let results = json!({ "samples": batch.len(), "metadata": batch.metadata });
            emit(serde_json::to_string_pretty(&results).expect("serialise"));
            if let Some(path) = &common.out {
                write_samples(&batch, path)?;
            }
            Ok(())
        }
        Command::Density {
            model,
            domain,
            at,
            latent,
            n,
            seed,
            out,
        } => {
            let net = load_model(&model)?;
            let dom = parse_domain(&domain, net.latent_dim())?;
            let prior = prior_for(&dom)?;
            let point = parse_f64s(&at, "--at")?;
            let config = json!({
                "model": model, "domain": dom, "at": point, "latent": latent, "n": n, "seed": seed,
            });
            announce("density", &config);
            let value = if latent || point.len() != net.output_dim() {
                if point.len() != net.latent_dim() {
                    return Err(Error::DimensionMismatch {
                        context: "--at point",
                        expected: net.output_dim(),
                        found: point.len(),
                    });
                }
                density_at_latent(&net, &prior, &point)?
            } else {
                // one candidate latent per region seen in the domain
                let draws = crate::sampling::draw_latents(&dom, net.latent_dim(), n, seed);
                let mut seen = HashSet::new();
                let candidates: Vec<Vec<f64>> = draws
                    .chunks(net.latent_dim())
                    .filter(|z| seen.insert(net.pattern_unchecked(z)))
                    .map(|z| z.to_vec())
                    .collect();
                density_at_point(&net, &prior, &point, &candidates, ON_MANIFOLD_TOL)?
            };
            emit(format_args!("p = {}", value.density()));
            let results = json!({
                "p": value.density(),
                "log_p": value.log_p,
                "region": value.region_pattern.to_string(),
                "latent": value.latent_preimage,
            });
            finish("density", config, results, out.as_deref())
        }
        Command::Entropy {
            model,
            domain,
            n,
            seed,
            out,
        } => {
            let net = load_model(&model)?;
            let dom = parse_domain(&domain, net.latent_dim())?;
            let prior = prior_for(&dom)?;
            let config = json!({ "model": model, "domain": dom, "n": n, "seed": seed });
            announce("entropy", &config);
            let est = pushforward_entropy(&net, &prior, n, seed)?;
            if let Some(w) = &est.warning {
                eprintln!("warning: {w}");
            }
            finish("entropy", config, json!(est), out.as_deref())
        }
        Command::Epsball {
            common,
            epsilon,
            reference,
            m,
        } => {
            let s = setup(&common)?;
            let mut config = common_config(&common, &s);
            config["epsilon"] = json!(epsilon);
            config["reference"] = json!(reference);
            config["m"] = json!(m);
            announce("epsball", &config);
            let reference = match &reference {
                Some(p) => read_points_csv(p)?,
                None => {
                    // an independent volume-weighted batch stands in for
                    // uniform points on the manifold
                    let mut rc = s.config.clone();
                    rc.seed = common.seed.wrapping_add(1);
                    let pool = build_pool(&s.net, &rc)?;
                    magnet_sample(&s.net, &pool, m, rc.seed)?.outputs
                }
            };
            let base = match epsilon {
                Some(e) => e,
                None => default_epsilon(&reference)?,
            };
            let standard = standard_sample(&s.net, &s.config.domain, common.k, common.seed)?;
            let pool = build_pool(&s.net, &s.config)?;
            let weighted = magnet_sample(&s.net, &pool, common.k, common.seed)?;
            let mut rows = Vec::new();
            for mult in EPSILON_MULTIPLIERS {
                let eps = base * mult;
                let a = epsball_counts(&reference, &standard.outputs, eps)?;
                let b = epsball_counts(&reference, &weighted.outputs, eps)?;
                rows.push(json!({
                    "multiplier": mult,
                    "epsilon": eps,
                    "standard": { "mean": a.mean, "dispersion": a.dispersion, "histogram": a.histogram },
                    "magnet": { "mean": b.mean, "dispersion": b.dispersion, "histogram": b.histogram },
                }));
            }
            finish("epsball", config, json!({ "base_epsilon": base, "radii": rows }), common.out.as_deref())
        }
        Command::Gmm {
            common,
            components,
            restarts,
        } => {
            let s = setup(&common)?;
            let comps = parse_components(&components)?;
            let mut config = common_config(&common, &s);
            config["components"] = json!(comps);
            config["restarts"] = json!(restarts);
            announce("gmm", &config);
            let standard = standard_sample(&s.net, &s.config.domain, common.k, common.seed)?;
            let pool = build_pool(&s.net, &s.config)?;
            let weighted = magnet_sample(&s.net, &pool, common.k, common.seed)?;
            let mut rows = Vec::new();
            let mut degenerate = None;
            for &c in &comps {
                let a = gmm_loglik(&standard.outputs, c, restarts, common.seed)?;
                let b = gmm_loglik(&weighted.outputs, c, restarts, common.seed)?;
                for r in [&a, &b] {
                    if 2 * r.degenerate_components > r.n_components && degenerate.is_none() {
                        degenerate = Some(Error::EmDegenerate {
                            floored: r.degenerate_components,
                            components: r.n_components,
                        });
                    }
                }
                rows.push(json!({
                    "components": c,
                    "standard": { "log_likelihood": a.log_likelihood, "converged": a.converged },
                    "magnet": { "log_likelihood": b.log_likelihood, "converged": b.converged },
                }));
            }
            finish("gmm", config, json!({ "fits": rows }), common.out.as_deref())?;
            degenerate.map_or(Ok(()), Err)
        }
        Command::Lipschitz { common, runs } => {
            let s = setup(&common)?;
            let mut config = common_config(&common, &s);
            config["runs"] = json!(runs);
            announce("lipschitz", &config);
            let pool = build_pool(&s.net, &s.config)?;
            let a = lipschitz_estimate(&s.net, LipschitzSampler::Standard(&s.config.domain), common.k, runs, common.seed)?;
            let b = lipschitz_estimate(&s.net, LipschitzSampler::Magnet(&pool), common.k, runs, common.seed)?;
            let checkpoints: Vec<usize> = [1, 10, 100, 1000, 10_000, 100_000]
                .into_iter()
                .filter(|&n| n <= common.k)
                .chain(std::iter::once(common.k))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let rows: Vec<Value> = checkpoints
                .iter()
                .map(|&n| {
                    json!({
                        "n": n,
                        "standard": { "mean": a.mean[n - 1], "std": a.std[n - 1] },
                        "magnet": { "mean": b.mean[n - 1], "std": b.std[n - 1] },
                    })
                })
                .collect();
            let results = json!({
                "checkpoints": rows,
                "standard_mean": a.mean, "standard_std": a.std,
                "magnet_mean": b.mean, "magnet_std": b.std,
            });
            emit(serde_json::to_string_pretty(&json!({ "checkpoints": results["checkpoints"] })).expect("serialise"));
            if let Some(path) = &common.out {
                write_report(&Report::new("lipschitz", config, results), path)?;
            }
            Ok(())
        }
        Command::Uniformity {
            common,
            bins,
            sampler,
        } => {
            let s = setup(&common)?;
            let mut config = common_config(&common, &s);
            config["bins"] = json!(bins);
            config["sampler"] = json!(sampler);
            announce("uniformity", &config);
            let binning = parse_bins(&bins, &s)?;
            let batch = draw(&s, &sampler, common.seed)?;
            let rep = uniformity_chi2(&s.net, &batch, &binning)?;
            finish("uniformity", config, json!(rep), common.out.as_deref())
        }
        Command::PoolStudy {
            common,
            ns,
            runs,
            bins,
        } => {
            let mut s = setup(&common)?;
            let sizes: Vec<usize> = ns
                .split(',')
                .map(|t| t.trim().parse::<usize>().ok().filter(|v| *v > 0))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::invalid(format!("bad pool sizes '{ns}'")))?;
            if runs == 0 {
                return Err(Error::invalid("--runs must be positive"));
            }
            let mut config = common_config(&common, &s);
            config["ns"] = json!(sizes);
            config["runs"] = json!(runs);
            config["bins"] = json!(bins);
            announce("pool-study", &config);
            let binning = parse_bins(&bins, &s)?;
            let mut rows = Vec::new();
            for &n in &sizes {
                let mut p = Vec::with_capacity(runs);
                let mut ess = Vec::with_capacity(runs);
                let mut max_w = Vec::with_capacity(runs);
                for r in 0..runs as u64 {
                    s.config.pool_size = n;
                    s.config.seed = common.seed.wrapping_add(r);
                    let pool = build_pool(&s.net, &s.config)?;
                    let w = pool.weights();
                    ess.push(pool.effective_sample_size() / n as f64);
                    max_w.push(w.iter().copied().fold(0.0, f64::max));
                    let batch = magnet_sample(&s.net, &pool, common.k, s.config.seed)?;
                    p.push(uniformity_chi2(&s.net, &batch, &binning)?.p_value);
                }
                rows.push(json!({
                    "n": n,
                    "median_p": median(&mut p.clone()),
                    "p_values": p,
                    "median_ess_fraction": median(&mut ess),
                    "median_max_weight": median(&mut max_w),
                }));
            }
            finish("pool-study", config, json!({ "sizes": rows }), common.out.as_deref())
        }
    }
}
