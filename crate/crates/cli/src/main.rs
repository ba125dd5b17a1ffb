use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use a2mm_core::amm::{apply_swap, Asset};
use a2mm_core::arbitrage::{is_profitable, n_pool_arbitrage, optimal_input, profit_at};
use a2mm_core::engine::{self, A2mmRequest, Mode};
use a2mm_core::netsim::{self, NetSimConfig};
use a2mm_core::oracle::{arb_fixtures, brute_arb, route_fixtures, step_for, SearchSpec};
use a2mm_core::routing::route;
use a2mm_core::trace::{self, GenConfig, Trace};
use a2mm_core::{AssetAmount, Direction, FeeRate, PoolState, SwapAction};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

const DEFAULT_SEED: u64 = 7;

/// Constant-product AMM toolkit: swaps, routing, arbitrage, batch plans,
/// trace forensics and stale-block simulation.
///
/// Amounts are decimal integers in base units. Bandwidth is Mbit/s,
/// latencies and timestamps are milliseconds.
///
/// Environment: A2MM_SEED overrides the default seed (7); A2MM_TOLERANCE
/// overrides the relative tolerance used by `oracle --check` (1e-3).
#[derive(Parser)]
#[command(name = "a2mm", version)]
struct Cli {
    /// Cap on worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quote (and optionally apply) a single swap on one pool.
    Swap(SwapArgs),
    /// Split an input across pools for the best total output.
    Route(RouteArgs),
    /// Optimal two-point arbitrage, or the N-pool sweep with --n-pool.
    Arb(ArbArgs),
    /// Build (and optionally execute) an aggregated batch for one request.
    Plan(PlanArgs),
    /// Replay a JSON-lines swap stream against a pool set.
    Replay(ReplayArgs),
    /// Generate brute-force oracle fixtures, or check the closed forms against them.
    Oracle(OracleArgs),
    /// Classify arbitrage and overhead in a JSON-lines chain trace.
    Analyze(AnalyzeArgs),
    /// Write a synthetic trace with planted ground truth.
    GenTrace(GenTraceArgs),
    /// Simulate stale-block rate versus bandwidth.
    Netsim(NetsimArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum Dir {
    XToY,
    YToX,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::XToY => Direction::XToY,
            Dir::YToX => Direction::YToX,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct PoolSet {
    /// JSON file with an array of pools {market_id, x, y, fee_num, fee_den}.
    #[arg(long)]
    pools: Option<PathBuf>,
    /// Inline pool "x,y" in base units (repeatable); ids are pool0, pool1, ...
    #[arg(long = "pool")]
    pool: Vec<String>,
    /// Fee for inline pools as num/den.
    #[arg(long, default_value = "997/1000")]
    fee: String,
}

#[derive(Args)]
struct SwapArgs {
    /// Reserve of X (base units).
    #[arg(long)]
    x: String,
    /// Reserve of Y (base units).
    #[arg(long)]
    y: String,
    /// Input amount (base units).
    #[arg(long = "in")]
    amount_in: String,
    #[arg(long, value_enum, default_value = "x-to-y")]
    direction: Dir,
    /// Revert unless at least this much comes out.
    #[arg(long, default_value = "0")]
    min_out: String,
    #[arg(long, default_value = "997/1000")]
    fee: String,
    /// text prints the output amount only; json adds the post-swap pool.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct RouteArgs {
    #[command(flatten)]
    pools: PoolSet,
    /// Total input (base units).
    #[arg(long = "in")]
    amount_in: String,
    #[arg(long, value_enum, default_value = "x-to-y")]
    direction: Dir,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ArbArgs {
    /// First pool "x,y" (base units).
    #[arg(long)]
    pool1: Option<String>,
    /// Second pool "x,y" (base units).
    #[arg(long)]
    pool2: Option<String>,
    /// Run the N-pool sweep over --pools/--pool instead.
    #[arg(long)]
    n_pool: bool,
    /// Asset to take profit in for --n-pool.
    #[arg(long, default_value = "x")]
    profit_asset: String,
    #[command(flatten)]
    set: PoolSet,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    pools: PoolSet,
    #[arg(long = "in")]
    amount_in: String,
    #[arg(long, value_enum, default_value = "x-to-y")]
    direction: Dir,
    #[arg(long, default_value = "0")]
    min_out: String,
    /// Disable the arbitrage branch.
    #[arg(long)]
    no_arb: bool,
    /// Also execute the plan and print the resulting pools.
    #[arg(long)]
    execute: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    pools: PoolSet,
    /// JSON-lines stream of {seq, market_hint, direction, amount_in, min_amount_out}.
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, default_value = "a2mm")]
    mode: String,
    #[arg(long)]
    no_arb: bool,
    /// json writes JSON lines; csv writes a table.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum OracleKind {
    Arb,
    Route,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum, default_value = "arb")]
    kind: OracleKind,
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Pools per routing instance (2 or 3).
    #[arg(long, default_value_t = 2)]
    pools_per_instance: usize,
    #[arg(long, env = "A2MM_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Instead of generating, check the implementation against this fixture file.
    #[arg(long)]
    check: Option<PathBuf>,
    /// Relative tolerance for --check.
    #[arg(long, env = "A2MM_TOLERANCE", default_value_t = 1e-3)]
    tolerance: f64,
    /// Brute-force a single pair "x,y" "x,y" over [lo, hi] with the given step.
    #[arg(long, num_args = 2, value_names = ["POOL1", "POOL2"])]
    pair: Option<Vec<String>>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// JSON-lines trace.
    #[arg(long)]
    trace: PathBuf,
    /// Also write the distance histogram as CSV.
    #[arg(long)]
    histogram_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, env = "A2MM_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    opportunities: usize,
    #[arg(long, default_value_t = 300)]
    blockspace: usize,
    #[arg(long, default_value_t = 500)]
    network: usize,
    #[arg(long, default_value_t = 8)]
    noise_markets: usize,
    #[arg(long, default_value_t = 3)]
    noise_per_block: usize,
    #[arg(long)]
    no_decoys: bool,
    /// Trace output (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Answer key output (JSON).
    #[arg(long)]
    key: PathBuf,
}

#[derive(Args)]
struct NetsimArgs {
    /// Config JSON (block interval in minutes, sizes in kB, latency percentiles
    /// in ms, hashrate shares, bandwidth in Mbit/s). Defaults to the bundled
    /// Ethereum parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single bandwidth in Mbit/s.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Comma-separated sweep in Mbit/s; fits a quadratic.
    #[arg(long, value_delimiter = ',')]
    bandwidths: Vec<f64>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long, env = "A2MM_SEED")]
    seed: Option<u64>,
    /// Flooding: "base_mbps,overhead_mbit,interval_s,amplification" → effective bandwidth.
    #[arg(long)]
    flood: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

struct Failure {
    kind: &'static str,
    message: String,
}

type Res<T> = Result<T, Failure>;

fn fail(kind: &'static str, e: impl std::fmt::Display) -> Failure {
    Failure {
        kind,
        message: e.to_string(),
    }
}

fn amount(s: &str) -> Res<u128> {
    s.trim().parse::<u128>().map_err(|e| fail("input", format!("bad amount {s:?}: {e}")))
}

fn fee(s: &str) -> Res<FeeRate> {
    let (n, d) = s.split_once('/').ok_or_else(|| fail("input", format!("fee must be num/den, got {s:?}")))?;
    FeeRate::new(amount(n)?, amount(d)?).map_err(|e| fail("input", e))
}

fn inline_pool(id: String, s: &str, f: FeeRate) -> Res<PoolState> {
    let (x, y) = s.split_once(',').ok_or_else(|| fail("input", format!("pool must be x,y, got {s:?}")))?;
    Ok(PoolState::new(id, amount(x)?, amount(y)?).with_fee(f))
}

fn read(p: &Path) -> Res<String> {
    fs::read_to_string(p).map_err(|e| fail("io", format!("{}: {e}", p.display())))
}

fn write_out(path: Option<&Path>, body: &str) -> Res<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| fail("io", format!("{}: {e}", p.display()))),
        None => {
            let mut o = std::io::stdout().lock();
            o.write_all(body.as_bytes()).map_err(|e| fail("io", e))
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

impl PoolSet {
    fn load(&self) -> Res<Vec<PoolState>> {
        let f = fee(&self.fee)?;
        let mut pools: Vec<PoolState> = match &self.pools {
            Some(p) => serde_json::from_str(&read(p)?).map_err(|e| fail("input", format!("{}: {e}", p.display())))?,
            None => Vec::new(),
        };
        for (i, s) in self.pool.iter().enumerate() {
            pools.push(inline_pool(format!("pool{i}"), s, f)?);
        }
        if pools.is_empty() {
            return Err(fail("input", "no pools given (use --pools or --pool)"));
        }
        Ok(pools)
    }
}

fn cmd_swap(a: SwapArgs) -> Res<String> {
    let pool = PoolState::new("pool0", amount(&a.x)?, amount(&a.y)?).with_fee(fee(&a.fee)?);
    let action = SwapAction::new("pool0", a.direction.into(), amount(&a.amount_in)?).with_min_out(amount(&a.min_out)?);
    let (post, out) = apply_swap(&pool, &action).map_err(|e| fail("amm", e))?;
    Ok(match a.format {
        Format::Text | Format::Csv => format!("{}\n", out.0),
        Format::Json => to_json(&json!({ "amount_out": out, "post": post })),
    })
}

fn cmd_route(a: RouteArgs) -> Res<String> {
    let pools = a.pools.load()?;
    let plan = route(&pools, a.direction.into(), AssetAmount(amount(&a.amount_in)?)).map_err(|e| fail("routing", e))?;
    Ok(match a.format {
        Format::Csv | Format::Text => {
            let mut s = String::from("market_id,amount_in,expected_out\n");
            for l in &plan.legs {
                s.push_str(&format!("{},{},{}\n", l.market_id, l.amount_in.0, l.expected_out.0));
            }
            s
        }
        Format::Json => to_json(&plan),
    })
}

fn cmd_arb(a: ArbArgs) -> Res<String> {
    if a.n_pool {
        let pools = a.set.load()?;
        let asset = match a.profit_asset.to_ascii_lowercase().as_str() {
            "x" => Asset::X,
            "y" => Asset::Y,
            other => return Err(fail("input", format!("profit asset must be x or y, got {other:?}"))),
        };
        let out = n_pool_arbitrage(&pools, asset).map_err(|e| fail("arbitrage", e))?;
        return Ok(to_json(&out));
    }
    let (Some(p1), Some(p2)) = (&a.pool1, &a.pool2) else {
        return Err(fail("input", "need --pool1 and --pool2 (or --n-pool)"));
    };
    let f = fee(&a.set.fee)?;
    let (p1, p2) = (inline_pool("pool1".into(), p1, f)?, inline_pool("pool2".into(), p2, f)?);
    let (rich, poor) = if is_profitable(&p1, &p2) {
        (p1, p2)
    } else if is_profitable(&p2, &p1) {
        (p2, p1)
    } else {
        return Ok(to_json(&json!({ "profitable": false })));
    };
    let delta = optimal_input(&rich, &poor).map_err(|e| fail("arbitrage", e))?;
    let profit = profit_at(&rich, &poor, delta.0).map_err(|e| fail("arbitrage", e))?;
    Ok(to_json(&json!({
        "profitable": true,
        "buy_y_on": rich.market_id,
        "sell_y_on": poor.market_id,
        "delta": delta,
        "profit": profit.to_string(),
    })))
}

fn cmd_plan(a: PlanArgs) -> Res<String> {
    let pools = a.pools.load()?;
    let req = A2mmRequest {
        direction: a.direction.into(),
        amount_in: AssetAmount(amount(&a.amount_in)?),
        min_amount_out: AssetAmount(amount(&a.min_out)?),
        arbitrage_enabled: !a.no_arb,
    };
    let plan = engine::plan(&req, &pools).map_err(|e| fail("engine", e))?;
    if !a.execute {
        return Ok(to_json(&plan));
    }
    let (_, report) = engine::execute(&plan, &pools).map_err(|e| fail("engine", e))?;
    Ok(to_json(&json!({ "plan": plan, "report": report })))
}

fn cmd_replay(a: ReplayArgs) -> Res<()> {
    let pools = a.pools.load()?;
    let mode: Mode = a.mode.parse().map_err(|e: String| fail("input", e))?;
    let stream = engine::parse_stream(&read(&a.stream)?);
    let (entries, _) = engine::replay(&stream, &pools, mode, !a.no_arb);
    let mut s = String::new();
    match a.format {
        Format::Csv => {
            s.push_str("seq,mode,leaf,amount_in,out_amm,out_a2mm,routing_gain,arb_profit,cost_units,error\n");
            for e in &entries {
                let leaf = e.leaf.map(|l| serde_json::to_value(l).unwrap().as_str().unwrap().to_string());
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    e.seq.map(|q| q.to_string()).unwrap_or_default(),
                    if e.mode == Mode::Amm { "amm" } else { "a2mm" },
                    leaf.unwrap_or_default(),
                    e.amount_in.0,
                    e.out_amm.0,
                    e.out_a2mm.0,
                    e.routing_gain,
                    e.arb_profit.0,
                    e.cost_units,
                    e.error.as_deref().unwrap_or("").replace(',', ";"),
                ));
            }
        }
        _ => {
            for e in &entries {
                s.push_str(&serde_json::to_string(e).expect("serializable"));
                s.push('\n');
            }
        }
    }
    write_out(a.out.as_deref(), &s)
}

fn cmd_oracle(a: OracleArgs) -> Res<()> {
    if let Some(pair) = &a.pair {
        let f = FeeRate::UNISWAP_V2;
        let p1 = inline_pool("pool1".into(), &pair[0], f)?;
        let p2 = inline_pool("pool2".into(), &pair[1], f)?;
        let hi = 4 * p1.x.0.max(p2.x.0);
        let step = match &a.step {
            Some(s) => amount(s)?,
            None => step_for(hi, 10_000),
        };
        let spec = SearchSpec::new(a2mm_core::oracle::Objective::ArbProfit, 1, hi, step);
        let r = brute_arb(&p1, &p2, &spec).map_err(|e| fail("oracle", e))?;
        return write_out(a.out.as_deref(), &to_json(&r));
    }
    if let Some(path) = &a.check {
        return check_fixtures(path, a.kind, a.tolerance);
    }
    let body = match a.kind {
        OracleKind::Arb => to_json(&arb_fixtures(a.seed, a.count)),
        OracleKind::Route => {
            if !(2..=3).contains(&a.pools_per_instance) {
                return Err(fail("input", "routing oracle supports 2 or 3 pools"));
            }
            to_json(&route_fixtures(a.seed, a.count, a.pools_per_instance))
        }
    };
    write_out(a.out.as_deref(), &body)
}

fn check_fixtures(path: &Path, kind: OracleKind, tol: f64) -> Res<()> {
    let text = read(path)?;
    let mut failures = Vec::new();
    let total;
    match kind {
        OracleKind::Arb => {
            let fx: Vec<a2mm_core::oracle::ArbFixture> =
                serde_json::from_str(&text).map_err(|e| fail("input", e))?;
            total = fx.len();
            for (i, f) in fx.iter().enumerate() {
                let (p1, p2) = &f.inputs;
                let d = optimal_input(p1, p2).map_err(|e| fail("arbitrage", e))?.0;
                let got = profit_at(p1, p2, d).map_err(|e| fail("arbitrage", e))?;
                let want = f.oracle_output.profit;
                if (got as f64) < want as f64 * (1.0 - tol) {
                    failures.push(json!({ "index": i, "profit": got.to_string(), "oracle": want.to_string() }));
                }
            }
        }
        OracleKind::Route => {
            let fx: Vec<a2mm_core::oracle::RouteFixture> =
                serde_json::from_str(&text).map_err(|e| fail("input", e))?;
            total = fx.len();
            for (i, f) in fx.iter().enumerate() {
                let (pools, dir, amt) = &f.inputs;
                let got = route(pools, *dir, *amt).map_err(|e| fail("routing", e))?.expected_total_out;
                let want = f.oracle_output.output;
                if (got.0 as f64) < want.0 as f64 * (1.0 - tol) {
                    failures.push(json!({ "index": i, "output": got, "oracle": want }));
                }
            }
        }
    }
    write_out(None, &to_json(&json!({ "checked": total, "failures": failures })))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(fail("oracle", format!("{} of {total} fixtures outside tolerance", failures.len())))
    }
}

fn cmd_analyze(a: AnalyzeArgs) -> Res<()> {
    let t = Trace::parse(&read(&a.trace)?).map_err(|e| fail("trace", e))?;
    for m in &t.malformed {
        eprintln!("{}", json!({ "warning": "malformed", "detail": m }));
    }
    let report = trace::classify(&t);
    if let Some(p) = &a.histogram_csv {
        write_out(Some(p), &report.histogram_csv())?;
    }
    write_out(a.out.as_deref(), &to_json(&report))
}

fn cmd_gen_trace(a: GenTraceArgs) -> Res<()> {
    if a.opportunities == 0 && (a.blockspace > 0 || a.network > 0) {
        return Err(fail("input", "overhead needs at least one opportunity"));
    }
    let cfg = GenConfig {
        seed: a.seed,
        opportunities: a.opportunities,
        blockspace_overhead: a.blockspace,
        network_overhead: a.network,
        noise_markets: a.noise_markets,
        noise_per_block: a.noise_per_block,
        decoys: !a.no_decoys,
    };
    let (records, key) = trace::generate(&cfg);
    write_out(Some(&a.out), &Trace::to_jsonl(&records))?;
    write_out(Some(&a.key), &to_json(&key))
}

fn cmd_netsim(a: NetsimArgs) -> Res<String> {
    if let Some(f) = &a.flood {
        let v: Vec<f64> = f
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| fail("input", format!("{s:?}: {e}"))))
            .collect::<Res<_>>()?;
        let [base, mbit, secs, amp] = v[..] else {
            return Err(fail("input", "--flood needs base,overhead_mbit,interval_s,amplification"));
        };
        let eff = netsim::flooding_degradation(base, mbit, secs, amp, 0.0).map_err(|e| fail("netsim", e))?;
        return Ok(to_json(&json!({ "effective_bandwidth_mbps": eff })));
    }
    let mut cfg: NetSimConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| fail("input", format!("{}: {e}", p.display())))?,
        None => netsim::ethereum(),
    };
    if let Some(b) = a.blocks {
        cfg.blocks = b;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.bandwidths.is_empty() {
        if let Some(b) = a.bandwidth {
            cfg.bandwidth_mbps = b;
        }
        let r = netsim::simulate(&cfg).map_err(|e| fail("netsim", e))?;
        return Ok(match a.format {
            Format::Json => to_json(&r),
            _ => format!(
                "bandwidth,stale_rate,stderr\n{},{:.6},{:.6}\n",
                cfg.bandwidth_mbps, r.stale_rate, r.stderr
            ),
        });
    }
    let curve = netsim::sweep_and_fit(&cfg, &a.bandwidths).map_err(|e| fail("netsim", e))?;
    Ok(match a.format {
        Format::Json => to_json(&curve),
        _ => format!("{}# fit {}\n", curve.to_csv(), serde_json::to_string(&curve.fit).expect("serializable")),
    })
}

fn run(cli: Cli) -> Res<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| fail("io", e))?;
    }
    match cli.cmd {
        Cmd::Swap(a) => write_out(None, &cmd_swap(a)?),
        Cmd::Route(a) => write_out(None, &cmd_route(a)?),
        Cmd::Arb(a) => write_out(None, &cmd_arb(a)?),
        Cmd::Plan(a) => write_out(None, &cmd_plan(a)?),
        Cmd::Replay(a) => cmd_replay(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::GenTrace(a) => cmd_gen_trace(a),
        Cmd::Netsim(a) => write_out(None, &cmd_netsim(a)?),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(1)
        }
    }
}
