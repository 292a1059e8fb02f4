use clap::{Subcommand, ValueEnum};
use collatz_core::arith::ln_biguint;
use collatz_core::ensemble::{
    bucket_mass_bound_check, empirical_density, entropy, enumerate_ensemble, preimage_scaling_report,
    sequence_probability,
};
use collatz_core::montecarlo::{clt_sample, theta_concentration, trajectory_drift, wiener_fdd, SampleConfig};
use collatz_core::structure::verify_same_p;
use collatz_core::walk::{theta_decompose, walk_path};
use collatz_core::{
    brute_force_progression, build, orbit, Error, PiElement, SamePOutcome, Sign, StructureRecord, SymbolSequence,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::manifest::{Output, SCHEMA};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Orbit table (j, x_j, k_j, z_j) of the accelerated map
    Orbit {
        /// Starting point, decimal, coprime to 6
        x: String,
        /// Number of steps
        m: usize,
    },
    /// Progression and image class of a symbol word
    Structure {
        /// Symbols, comma separated, e.g. 2,1,3
        ks: String,
        /// Starting class: +1 or -1
        #[arg(allow_hyphen_values = true)]
        eps: Sign,
        /// Check the same-p property for p = 0..=P
        #[arg(long, value_name = "P")]
        verify: Option<u64>,
        /// Compare with a brute-force scan over P periods
        #[arg(long, value_name = "P", num_args = 0..=1, default_missing_value = "50")]
        oracle: Option<u64>,
    },
    /// Residue walk (r_j, delta_j) and the rho/kappa/theta split
    Walk {
        ks: String,
        #[arg(allow_hyphen_values = true)]
        eps: Sign,
    },
    /// Exact class table of all words with every symbol <= k_cap
    Ensemble { m: usize, k_cap: u32 },
    /// Entropy of the class distribution
    Entropy {
        m: usize,
        k_cap: u32,
        #[arg(default_value_t = 1.0)]
        gamma0: f64,
    },
    /// Normalized symbol sums against the standard normal
    Clt { m: usize, n: usize, seed: u64 },
    /// Mean log-ratio per step along random trajectories
    Drift { m: usize, n: usize, x_bits: u64, seed: u64 },
    /// Empirical P{|theta_m| > m^gamma0}
    Theta { m: usize, n: usize, gamma0: f64, seed: u64 },
    /// Share of Pi up to N covered by a progression
    Density {
        ks: String,
        #[arg(allow_hyphen_values = true)]
        eps: Sign,
        n: BigUint,
    },
    /// Covariance of the rescaled walk at given times
    Wiener {
        /// Number of steps M
        steps: usize,
        n: usize,
        seed: u64,
        /// Comma-separated times in (0, 1], multiples of 1/M
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        times: Vec<f64>,
    },
    /// Largest cell mass against the bucket bound
    Buckets {
        m: usize,
        k: u32,
        #[arg(long, default_value_t = 10)]
        width: i64,
    },
    /// Preimage counts per class against 2^(2m) 3^-m
    Preimages { m: usize, k_cap: u32 },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Budget(_) => 4,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            Error::EmptyRecord | Error::EmptyTable | Error::NotAProgression(_) => CliError::Failed(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

/// Result of one subcommand before it is written out.
pub struct Run {
    pub outputs: Vec<Output>,
    pub seed: Option<u64>,
    pub config: Value,
    /// A requested check failed; outputs are still emitted.
    pub verification_failed: bool,
}

impl Run {
    fn single(name: &str, format: Format, body: Value, seed: Option<u64>, config: Value) -> Run {
        let (ext, text) = match format {
            Format::Json => ("json", json_text(&body)),
            Format::Csv => ("csv", flat_csv(&body)),
        };
        Run {
            outputs: vec![Output { name: format!("{name}.{ext}"), body: text }],
            seed,
            config,
            verification_failed: false,
        }
    }
}

fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

/// `{"schema": 1, ...report}`.
fn tagged<T: Serialize>(report: &T) -> Value {
    let mut out = Map::new();
    out.insert("schema".into(), json!(SCHEMA));
    match serde_json::to_value(report).expect("report serializes") {
        Value::Object(fields) => out.extend(fields),
        other => {
            out.insert("value".into(), other);
        }
    }
    Value::Object(out)
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, rows)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, rows)),
        Value::String(s) => rows.push((prefix.to_string(), s.clone())),
        Value::Null => rows.push((prefix.to_string(), String::new())),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

/// A report as two-column CSV `field,value` with dotted paths.
fn flat_csv(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["field", "value"]).expect("csv");
    for (k, v) in rows {
        w.write_record([k, v]).expect("csv");
    }
    String::from_utf8(w.into_inner().expect("csv")).expect("utf8")
}

fn word(ks: &str, eps: Sign) -> Result<SymbolSequence, CliError> {
    Ok(SymbolSequence::parse(ks, eps)?)
}

pub fn run(cmd: &Command, format: Option<Format>) -> Result<Run, CliError> {
    let json_default = format.unwrap_or(Format::Json);
    match cmd {
        Command::Orbit { x, m } => {
            let x0: PiElement = x.parse()?;
            let rec = orbit(&x0, *m);
            let ln0 = ln_biguint(x0.value());
            let config = json!({ "x": x0.to_string(), "m": m });
            let format = format.unwrap_or(Format::Csv);
            let rows: Vec<(usize, String, u64, f64)> = rec
                .steps
                .iter()
                .enumerate()
                .map(|(i, s)| (i + 1, s.x.to_string(), s.k, ln_biguint(s.x.value()) - ln0))
                .collect();
            let body = match format {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["j", "x", "k", "z"]).expect("csv");
                    for (j, x, k, z) in &rows {
                        w.write_record([j.to_string(), x.clone(), k.to_string(), z.to_string()]).expect("csv");
                    }
                    String::from_utf8(w.into_inner().expect("csv")).expect("utf8")
                }
                Format::Json => json_text(&json!({
                    "schema": SCHEMA,
                    "origin": x0.to_string(),
                    "fixed_point_at": rec.fixed_point_at,
                    "steps": rows.iter().map(|(j, x, k, z)| json!({ "j": j, "x": x, "k": k, "z": z })).collect::<Vec<_>>(),
                })),
            };
            if let Some(j) = rec.fixed_point_at {
                log::info!("orbit reaches 1 at step {j}");
            }
            let ext = if format == Format::Csv { "csv" } else { "json" };
            Ok(Run {
                outputs: vec![Output { name: format!("orbit.{ext}"), body }],
                seed: None,
                config,
                verification_failed: false,
            })
        }
        Command::Structure { ks, eps, verify, oracle } => {
            let seq = word(ks, *eps)?;
            let pair = build(&seq);
            let (q_star, r_star) = pair.presented();
            let mut body = match tagged(&StructureRecord::from(&pair)) {
                Value::Object(m) => m,
                _ => unreachable!("record is an object"),
            };
            body.insert("presented_q".into(), json!(q_star.to_string()));
            body.insert("presented_r".into(), json!(pair.lambda.presented_r().to_string()));
            body.insert("image_base".into(), json!(r_star.to_string()));
            let mut failed = false;
            if let Some(p_max) = verify {
                let outcome = verify_same_p(&pair, *p_max);
                let fails_at = match outcome {
                    SamePOutcome::Holds => None,
                    SamePOutcome::FailsAt(p) => Some(p),
                };
                failed |= !outcome.holds();
                body.insert("verify".into(), json!({ "p_max": p_max, "holds": outcome.holds(), "fails_at": fails_at }));
            }
            if let Some(p_count) = oracle {
                let scan = brute_force_progression(&seq, *p_count)?;
                let matches = scan == pair;
                failed |= !matches;
                body.insert("oracle".into(), json!({ "p_count": p_count, "matches": matches }));
            }
            let config = json!({ "ks": seq.ks(), "eps": eps, "verify": verify, "oracle": oracle });
            let mut run = Run::single("structure", json_default, Value::Object(body), None, config);
            run.verification_failed = failed;
            Ok(run)
        }
        Command::Walk { ks, eps } => {
            let seq = word(ks, *eps)?;
            let path = walk_path(&seq);
            let states: Vec<Value> = path
                .states
                .iter()
                .enumerate()
                .map(|(j, (r, d))| json!({ "j": j, "r": r.to_string(), "delta": d }))
                .collect();
            let body = json!({
                "schema": SCHEMA,
                "ks": seq.ks(),
                "eps": eps,
                "states": states,
                "decomposition": theta_decompose(&seq),
            });
            let config = json!({ "ks": seq.ks(), "eps": eps });
            Ok(Run::single("walk", json_default, body, None, config))
        }
        Command::Ensemble { m, k_cap } => {
            let table = enumerate_ensemble(*m, *k_cap)?;
            let config = json!({ "m": m, "k_cap": k_cap });
            let format = format.unwrap_or(Format::Csv);
            let body = match format {
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["r", "delta", "count", "mass_num", "mass_den"]).expect("csv");
                    for ((r, delta), e) in &table.entries {
                        w.write_record([
                            r.to_string(),
                            delta.to_string(),
                            e.count.to_string(),
                            e.mass.numer().to_string(),
                            e.mass.denom().to_string(),
                        ])
                        .expect("csv");
                    }
                    String::from_utf8(w.into_inner().expect("csv")).expect("utf8")
                }
                Format::Json => {
                    let classes: Vec<Value> = table
                        .entries
                        .iter()
                        .map(|((r, delta), e)| {
                            json!({
                                "r": r.to_string(),
                                "delta": delta,
                                "count": e.count,
                                "mass_num": e.mass.numer().to_string(),
                                "mass_den": e.mass.denom().to_string(),
                            })
                        })
                        .collect();
                    json_text(&json!({
                        "schema": SCHEMA,
                        "m": m,
                        "k_cap": k_cap,
                        "tail_mass": { "num": table.tail_mass.numer().to_string(), "den": table.tail_mass.denom().to_string() },
                        "classes": classes,
                    }))
                }
            };
            let ext = if format == Format::Csv { "csv" } else { "json" };
            Ok(Run {
                outputs: vec![Output { name: format!("ensemble.{ext}"), body }],
                seed: None,
                config,
                verification_failed: false,
            })
        }
        Command::Entropy { m, k_cap, gamma0 } => {
            let report = entropy(&enumerate_ensemble(*m, *k_cap)?, *gamma0)?;
            let config = json!({ "m": m, "k_cap": k_cap, "gamma0": gamma0 });
            Ok(Run::single("entropy", json_default, tagged(&report), None, config))
        }
        Command::Clt { m, n, seed } => {
            let report = clt_sample(&SampleConfig::symbols(*m, *n, *seed))?;
            let config = json!(report.config);
            Ok(Run::single("clt", json_default, tagged(&report), Some(*seed), config))
        }
        Command::Drift { m, n, x_bits, seed } => {
            let cfg = SampleConfig { m: *m, n: *n, seed: *seed, x_bits: *x_bits };
            let report = trajectory_drift(&cfg)?;
            if report.fixed_point_hits > 0 {
                log::warn!("{} trajectories reached 1 and were excluded", report.fixed_point_hits);
            }
            Ok(Run::single("drift", json_default, tagged(&report), Some(*seed), json!(cfg)))
        }
        Command::Theta { m, n, gamma0, seed } => {
            let report = theta_concentration(*m, *n, *gamma0, *seed)?;
            let config = json!({ "m": m, "n": n, "gamma0": gamma0, "seed": seed });
            Ok(Run::single("theta", json_default, tagged(&report), Some(*seed), config))
        }
        Command::Density { ks, eps, n } => {
            let seq = word(ks, *eps)?;
            let pair = build(&seq);
            let d = empirical_density(&pair.sigma, n)?;
            let expected = sequence_probability(&seq);
            let body = json!({
                "schema": SCHEMA,
                "ks": seq.ks(),
                "eps": eps,
                "K": seq.total(),
                "n": n.to_string(),
                "density": { "num": d.numer().to_string(), "den": d.denom().to_string() },
                "density_f64": d.to_f64(),
                "expected": { "num": expected.numer().to_string(), "den": expected.denom().to_string() },
                "expected_f64": expected.to_f64(),
            });
            let config = json!({ "ks": seq.ks(), "eps": eps, "n": n.to_string() });
            Ok(Run::single("density", json_default, body, None, config))
        }
        Command::Wiener { steps, n, seed, times } => {
            let report = wiener_fdd(*steps, times, *n, *seed)?;
            let config = json!({ "steps": steps, "n": n, "seed": seed, "times": times });
            Ok(Run::single("wiener", json_default, tagged(&report), Some(*seed), config))
        }
        Command::Buckets { m, k, width } => {
            let report = bucket_mass_bound_check(*m, *k, *width)?;
            let config = json!({ "m": m, "k": k, "width": width });
            let mut run = Run::single("buckets", json_default, tagged(&report), None, config);
            // the bound is only claimed from depth 3 on
            run.verification_failed = *m >= 3 && !report.holds;
            Ok(run)
        }
        Command::Preimages { m, k_cap } => {
            let report = preimage_scaling_report(*m, *k_cap)?;
            let config = json!({ "m": m, "k_cap": k_cap });
            Ok(Run::single("preimages", json_default, tagged(&report), None, config))
        }
    }
}
