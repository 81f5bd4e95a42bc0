//! `toric`: command-line front end for toric and disguised toric locus computations.
//!
//! Every subcommand prints one JSON document (or a table with `--format table`)
//! and exits with 0 for a positive verdict, 1 for a negative one and 2 on errors.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use toric_locus::disguised::{
    connect_members, disguised_locus_membership, disguised_membership, PathConfig, PathResult,
};
use toric_locus::dynamics::{equivalence_residual, realize_on};
use toric_locus::egraph::{complete_graph, is_weakly_reversible, weakly_reversible_subgraphs_capped, NetworkFile};
use toric_locus::flux::{balance_residual, flux_membership, is_complex_balanced_flux};
use toric_locus::toric::{complex_balance_residual, toric_membership, toric_membership_on};
use toric_locus::{EGraph, Error, FluxVector, RateVector, State};

use crate::config::{Format, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "toric", version, about = "Toric and disguised toric loci of mass-action systems")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Toric-locus membership, or complex balance at a given state.
    CheckCb {
        network: PathBuf,
        rates: PathBuf,
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Dynamical equivalence of two mass-action systems.
    Equiv {
        network_a: PathBuf,
        rates_a: PathBuf,
        network_b: PathBuf,
        rates_b: PathBuf,
    },
    /// Realize a system on a target graph.
    Realize {
        network: PathBuf,
        rates: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        sign: SignArg,
        /// Also require the source rates to be toric.
        #[arg(long)]
        toric: bool,
    },
    /// Complex balance of a flux vector and its realizability on a target.
    Flux {
        network: PathBuf,
        flux: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[command(flatten)]
        sign: SignArg,
    },
    /// Disguised toric locus membership.
    Disguised {
        network: PathBuf,
        rates: PathBuf,
        /// Search only this target instead of all weakly reversible
        /// subgraphs of the complete graph.
        #[arg(long)]
        target: Option<PathBuf>,
        #[command(flatten)]
        sign: SignArg,
    },
    /// Path between two members of the disguised toric locus.
    Path {
        network: PathBuf,
        rates_a: PathBuf,
        rates_b: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Shared steady state of the middle segment (default all ones).
        #[arg(long)]
        anchor: Option<PathBuf>,
        #[command(flatten)]
        sign: SignArg,
    },
    /// Weakly reversible subgraphs, as lists of edge indices.
    EnumWr {
        network: PathBuf,
        /// Enumerate subgraphs of the complete graph on the vertices.
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        max: Option<usize>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct SignArg {
    /// Allow signed rates on the source side.
    #[arg(long)]
    signed: bool,
}

struct Outcome {
    ok: bool,
    document: serde_json::Value,
    table: Vec<(String, String)>,
}

impl Outcome {
    fn new(ok: bool, document: serde_json::Value) -> Self {
        Self {
            ok,
            document,
            table: Vec::new(),
        }
    }

    fn row(mut self, key: &str, value: impl ToString) -> Self {
        self.table.push((key.to_string(), value.to_string()));
        self
    }
}

#[derive(Debug)]
struct CliError(String);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError(format!("cannot parse {}: {e}", path.display())))
}

fn read_network(path: &Path) -> CliResult<EGraph> {
    let file: NetworkFile = read_json(path)?;
    EGraph::try_from(file).map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn read_rates(path: &Path, graph: &EGraph) -> CliResult<RateVector> {
    let values: Vec<f64> = read_json(path)?;
    Ok(RateVector::for_graph(graph, values)?)
}

fn read_state(path: &Path, graph: &EGraph) -> CliResult<State> {
    let state: State = read_json(path)?;
    if state.len() != graph.dimension() {
        return Err(CliError(format!(
            "{}: state has {} entries, network dimension is {}",
            path.display(),
            state.len(),
            graph.dimension()
        )));
    }
    Ok(state)
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("serializable output")
}

fn run(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    let tol = &cfg.tolerances;
    match command {
        Command::CheckCb {
            network,
            rates,
            state,
        } => {
            let g = read_network(network)?;
            let k = read_rates(rates, &g)?;
            if let Some(state) = state {
                let x = read_state(state, &g)?;
                let residual = complex_balance_residual(&g, &k, &x)?;
                let ok = residual <= tol.tol;
                return Ok(Outcome::new(
                    ok,
                    json!({ "complex_balanced": ok, "residual": residual }),
                )
                .row("complex balanced", ok)
                .row("residual", format!("{residual:e}")));
            }
            let cert = toric_membership(&g, &k, tol)?;
            let reason = cert.reason.map_or("", |r| r.describe());
            Ok(Outcome::new(cert.member, to_value(&cert))
                .row("member", cert.member)
                .row("reason", reason)
                .row("log-linear residual", format!("{:e}", cert.residual))
                .row("balance residual", format!("{:e}", cert.balance_residual)))
        }
        Command::Equiv {
            network_a,
            rates_a,
            network_b,
            rates_b,
        } => {
            let ga = read_network(network_a)?;
            let ka = read_rates(rates_a, &ga)?;
            let gb = read_network(network_b)?;
            let kb = read_rates(rates_b, &gb)?;
            let residual = equivalence_residual(&ga, ka.values(), &gb, kb.values())?;
            let ok = residual <= tol.tol;
            Ok(
                Outcome::new(ok, json!({ "equivalent": ok, "residual": residual }))
                    .row("equivalent", ok)
                    .row("max vertex residual", format!("{residual:e}")),
            )
        }
        Command::Realize {
            network,
            rates,
            target,
            sign,
            toric,
        } => {
            let g = read_network(network)?;
            let k = read_rates(rates, &g)?;
            let t = read_network(target)?;
            let positive = !sign.signed;
            if *toric {
                let cert = toric_membership_on(&g, &k, &t, positive, tol)?;
                let reason = cert.reason.map_or("", |r| r.describe());
                return Ok(Outcome::new(cert.member, to_value(&cert))
                    .row("member", cert.member)
                    .row("reason", reason));
            }
            let realized = realize_on(&g, &k, &t, positive, tol)?;
            let ok = realized.is_some();
            Ok(
                Outcome::new(ok, json!({ "realizable": ok, "rates": realized }))
                    .row("realizable", ok)
                    .row("rates", format!("{:?}", realized.as_ref().map(|r| r.values()))),
            )
        }
        Command::Flux {
            network,
            flux,
            target,
            sign,
        } => {
            let g = read_network(network)?;
            let values: Vec<f64> = read_json(flux)?;
            if values.len() != g.num_edges() {
                return Err(Error::LengthMismatch {
                    expected: g.num_edges(),
                    found: values.len(),
                }
                .into());
            }
            let j = FluxVector::new(values);
            let t = match target {
                Some(p) => read_network(p)?,
                None => g.clone(),
            };
            let balanced = is_complex_balanced_flux(&g, &j, tol.tol);
            let residual = balance_residual(&g, j.values())?;
            let realized = flux_membership(&g, &j, &t, !sign.signed, tol)?;
            let ok = realized.is_some();
            Ok(Outcome::new(
                ok,
                json!({
                    "member": ok,
                    "complex_balanced": balanced,
                    "balance_residual": residual,
                    "realized_flux": realized,
                }),
            )
            .row("member", ok)
            .row("complex balanced", balanced)
            .row("balance residual", format!("{residual:e}")))
        }
        Command::Disguised {
            network,
            rates,
            target,
            sign,
        } => {
            let g = read_network(network)?;
            let k = read_rates(rates, &g)?;
            let cert = match target {
                Some(p) => {
                    let t = read_network(p)?;
                    if !is_weakly_reversible(&t) {
                        return Err(CliError(format!("{}: target is not weakly reversible", p.display())));
                    }
                    disguised_membership(&g, &k, &t, sign.signed, &cfg.budget, tol)?
                }
                None => disguised_locus_membership(&g, &k, sign.signed, &cfg.budget, tol)?,
            };
            let target_text = cert
                .target_graph
                .as_ref()
                .map_or_else(String::new, ToString::to_string);
            Ok(Outcome::new(cert.member, to_value(&cert))
                .row("member", cert.member)
                .row("target", target_text)
                .row("search exhausted", cert.search_exhausted)
                .row("proven infeasible", cert.proven_infeasible)
                .row("equivalence residual", format!("{:e}", cert.residuals.equivalence)))
        }
        Command::Path {
            network,
            rates_a,
            rates_b,
            target,
            anchor,
            sign,
        } => {
            let g = read_network(network)?;
            let ka = read_rates(rates_a, &g)?;
            let kb = read_rates(rates_b, &g)?;
            let x0 = match anchor {
                Some(p) => read_state(p, &g)?,
                None => State::ones(g.dimension()),
            };
            let target = match target {
                Some(p) => Some(read_network(p)?),
                None => None,
            };
            let config = PathConfig {
                signed: sign.signed,
                target,
                budget: cfg.budget,
                samples: cfg.samples,
                tolerances: *tol,
            };
            match connect_members(&g, &ka, &kb, &x0, &config) {
                Ok(path) => Ok(path_outcome(&path)),
                Err(e @ Error::MembershipFailure { .. }) => Ok(Outcome::new(
                    false,
                    json!({ "member": false, "error": e.to_string() }),
                )
                .row("error", e)),
                Err(e) => Err(e.into()),
            }
        }
        Command::EnumWr {
            network,
            complete,
            max,
        } => {
            let g = read_network(network)?;
            let g = if *complete { complete_graph(&g) } else { g };
            let limit = max.unwrap_or(usize::MAX);
            let subgraphs: Vec<Vec<usize>> =
                weakly_reversible_subgraphs_capped(&g, limit, cfg.budget.subset_cap)?
                    .map(|s| s.edges)
                    .collect();
            let network = NetworkFile::from(&g);
            Ok(Outcome::new(
                true,
                json!({
                    "network": network,
                    "count": subgraphs.len(),
                    "subgraphs": subgraphs,
                }),
            )
            .row("count", subgraphs.len()))
        }
    }
}

fn path_outcome(path: &PathResult) -> Outcome {
    let mut out = Outcome::new(true, to_value(path));
    for (i, seg) in path.segments.iter().enumerate() {
        let worst = seg
            .samples
            .iter()
            .map(|s| s.certificate.residuals.equivalence.max(s.certificate.residuals.balance))
            .fold(0.0, f64::max);
        out = out.row(
            &format!("segment {i}"),
            format!(
                "{:?}  samples {}  length {:.6}  worst residual {:e}",
                seg.kind,
                seg.samples.len(),
                seg.length(),
                worst
            ),
        );
    }
    out
}

fn render(outcome: &Outcome, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&outcome.document).expect("serializable output"),
        Format::Table => {
            let width = outcome.table.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
            outcome
                .table
                .iter()
                .map(|(k, v)| format!("{k:width$}  {v}"))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(&cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(outcome) => {
            println!("{}", render(&outcome, cfg.format));
            ExitCode::from(if outcome.ok { 0 } else { 1 })
        }
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
