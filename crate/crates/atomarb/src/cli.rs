//! Command-line surface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::Duration;

use atomarb_core::analytics::{Aggregator, DAY_SECS};
use atomarb_core::classify::SearcherIdentity;
use atomarb_core::synth::{generate, SynthPlan};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::{BlockRange, Direction};
use crate::config::{
    ConfigFile, ReportFormat, RunConfig, DEFAULT_BUCKET_DAYS, DEFAULT_CONFIRMATIONS, DEFAULT_MAX_ATTEMPTS,
    DEFAULT_TIMEOUT_SECS,
};
use crate::fixture::FixtureError;
use crate::records::RecordReader;
use crate::registry::{load_pools, PoolCacheError};
use crate::report::{load_exclusions, load_usd_rates, parse_iso8601, write_report};
use crate::rpc::{RpcClient, RpcConfig};
use crate::scan::{run_scan, ScanError, ScanJob};
use crate::source::{BlockSource, FetchError, FixtureSource};
use crate::traverse::DEFAULT_PARALLELISM;
use crate::verify::{check_agreement, load_truth, write_synth, CONFIG_FILE, FIXTURE_FILE, POOLS_FILE, TRUTH_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_TRANSPORT: i32 = 69;
pub const EXIT_IO: i32 = 74;

const EXIT_HELP: &str = "\
Exit codes:
  0   success
  1   verify found disagreements
  2   scan stopped early (interrupt); rerun the same command to resume
  64  bad arguments or configuration
  65  malformed input data
  69  node unreachable or failing after retries
  74  file read or write failure

Every option can also be set through an ATOMARB_* environment variable
(shown next to each option). Flags beat the environment, which beats the
--config file.";

#[derive(Debug, Parser)]
#[command(name = "atomarb", version, about = "Find atomic arbitrage in EVM blocks and bucket it over time", after_help = EXIT_HELP)]
pub struct Cli {
    /// JSON config file; flags and environment variables override it.
    #[arg(long, global = true, env = "ATOMARB_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Print the merged configuration (secrets masked) and exit.
    #[arg(long, global = true, env = "ATOMARB_SHOW_CONFIG")]
    pub show_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify every transaction of a block range into a JSON-lines file.
    Scan(ScanArgs),
    /// Aggregate classification lines into time buckets.
    Report(ReportArgs),
    /// Generate a synthetic ledger with ground-truth labels.
    Synth(SynthArgs),
    /// Check pipeline and reference oracle against ground truth.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IdentityArg {
    From,
    To,
}

impl From<IdentityArg> for SearcherIdentity {
    fn from(v: IdentityArg) -> Self {
        match v {
            IdentityArg::From => SearcherIdentity::From,
            IdentityArg::To => SearcherIdentity::To,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// JSON array of FastLane contract addresses.
    #[arg(long, env = "ATOMARB_FASTLANE_ADDRESSES", value_name = "PATH")]
    pub fastlane_addresses: Option<PathBuf>,
    /// Which address counts as the searcher.
    #[arg(long, env = "ATOMARB_SEARCHER_IDENTITY", value_enum)]
    pub searcher_identity: Option<IdentityArg>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// JSON-RPC endpoint of an archive node.
    #[arg(long, env = "ATOMARB_RPC_URL", hide_env_values = true)]
    pub rpc_url: Option<String>,
    /// Extra request header, `Name: value`; a bare value is sent as Authorization.
    #[arg(long, env = "ATOMARB_AUTH_HEADER", hide_env_values = true)]
    pub auth_header: Option<String>,
    /// Per-request timeout in seconds [default: 30].
    #[arg(long, env = "ATOMARB_TIMEOUT_SECS")]
    pub timeout_secs: Option<u64>,
    /// Attempts per request before giving up [default: 5].
    #[arg(long, env = "ATOMARB_MAX_ATTEMPTS")]
    pub max_attempts: Option<u32>,
    /// Read blocks from a fixture file instead of a node.
    #[arg(long, env = "ATOMARB_FIXTURE", value_name = "PATH")]
    pub fixture: Option<PathBuf>,
    #[arg(long, env = "ATOMARB_FROM_BLOCK")]
    pub from_block: Option<u64>,
    /// Last block; defaults to the fixture's last block or head minus confirmations.
    #[arg(long, env = "ATOMARB_TO_BLOCK")]
    pub to_block: Option<u64>,
    /// Scan order [default: forward].
    #[arg(long, env = "ATOMARB_DIRECTION", value_enum)]
    pub direction: Option<Direction>,
    /// Minimum depth below head for node scans [default: 256].
    #[arg(long, env = "ATOMARB_CONFIRMATIONS")]
    pub confirmations: Option<u64>,
    /// Classification output (JSON lines).
    #[arg(long, env = "ATOMARB_OUT", value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Checkpoint file [default: <out>.ckpt].
    #[arg(long, env = "ATOMARB_CHECKPOINT", value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Discard an existing checkpoint and start the range from scratch.
    #[arg(long, env = "ATOMARB_RESET_CHECKPOINT")]
    pub reset_checkpoint: bool,
    /// Pool metadata file; read at start, updated with discovered pools.
    #[arg(long, env = "ATOMARB_POOL_CACHE", value_name = "PATH")]
    pub pool_cache: Option<PathBuf>,
    /// Blocks fetched concurrently [default: 8].
    #[arg(long, env = "ATOMARB_PARALLELISM")]
    pub parallelism: Option<usize>,
    #[command(flatten)]
    pub classify: ClassifyArgs,
    #[arg(long, hide = true)]
    pub stop_after_blocks: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Classification lines written by `scan`.
    #[arg(long, env = "ATOMARB_INPUT", value_name = "PATH")]
    pub input: PathBuf,
    /// Report file; standard output when absent.
    #[arg(long, env = "ATOMARB_OUT", value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// [default: csv]
    #[arg(long, env = "ATOMARB_FORMAT", value_enum)]
    pub format: Option<ReportFormat>,
    /// Start of bucket 0, RFC 3339; defaults to the earliest record.
    #[arg(long, env = "ATOMARB_EPOCH_START")]
    pub epoch_start: Option<String>,
    /// Bucket length in days [default: 28].
    #[arg(long, env = "ATOMARB_BUCKET_DAYS")]
    pub bucket_days: Option<u64>,
    /// Extra exclusion file, applied on top of the bundled one.
    #[arg(long, env = "ATOMARB_EXCLUSIONS", value_name = "PATH")]
    pub exclusions: Option<PathBuf>,
    /// Common-currency to USD rate series.
    #[arg(long, env = "ATOMARB_USD_RATES", value_name = "PATH")]
    pub usd_rates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Plan JSON; missing fields take their defaults.
    #[arg(long, env = "ATOMARB_PLAN", value_name = "PATH")]
    pub plan: Option<PathBuf>,
    #[arg(long, env = "ATOMARB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "ATOMARB_BLOCK_COUNT")]
    pub block_count: Option<u64>,
    /// Directory for fixture.jsonl, truth.json, pools.json, config.json, plan.json.
    #[arg(long, env = "ATOMARB_OUT_DIR", value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory written by `synth`; supplies defaults for the other paths.
    #[arg(long, env = "ATOMARB_DIR", value_name = "DIR")]
    pub dir: Option<PathBuf>,
    #[arg(long, env = "ATOMARB_FIXTURE", value_name = "PATH")]
    pub fixture: Option<PathBuf>,
    #[arg(long, env = "ATOMARB_TRUTH", value_name = "PATH")]
    pub truth: Option<PathBuf>,
    #[arg(long, env = "ATOMARB_POOL_CACHE", value_name = "PATH")]
    pub pool_cache: Option<PathBuf>,
    #[command(flatten)]
    pub classify: ClassifyArgs,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn config_err(e: impl ToString) -> Failure {
    Failure::new(EXIT_CONFIG, e.to_string())
}

fn data_err(e: impl ToString) -> Failure {
    Failure::new(EXIT_DATA, e.to_string())
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn fetch_failure(e: FetchError) -> Failure {
    let code = match e {
        FetchError::Transport { .. } | FetchError::Rpc { .. } | FetchError::Revert(_) => EXIT_TRANSPORT,
        FetchError::NotFound(_) | FetchError::Decode(_) => EXIT_DATA,
    };
    Failure::new(code, e.to_string())
}

fn fixture_failure(e: FixtureError) -> Failure {
    match e {
        FixtureError::Io { .. } => Failure::new(EXIT_IO, e.to_string()),
        _ => data_err(e),
    }
}

fn pool_failure(e: PoolCacheError) -> Failure {
    match e {
        PoolCacheError::Io { .. } => Failure::new(EXIT_IO, e.to_string()),
        PoolCacheError::Invalid { .. } => data_err(e),
    }
}

fn scan_failure(e: ScanError) -> Failure {
    match e {
        ScanError::Fetch(f) => fetch_failure(f),
        ScanError::Checkpoint(crate::checkpoint::CheckpointError::Io { .. }) | ScanError::Io { .. } => {
            Failure::new(EXIT_IO, e.to_string())
        }
        ScanError::PoolCache(p) => pool_failure(p),
        _ => config_err(e),
    }
}

fn classify_overrides(a: &ClassifyArgs) -> ConfigFile {
    ConfigFile {
        fastlane_addresses: a.fastlane_addresses.clone(),
        searcher_identity: a.searcher_identity.map(Into::into),
        ..ConfigFile::default()
    }
}

fn overrides(cmd: &Command) -> ConfigFile {
    match cmd {
        Command::Scan(a) => ConfigFile {
            rpc_url: a.rpc_url.clone(),
            auth_header: a.auth_header.clone(),
            timeout_secs: a.timeout_secs,
            max_attempts: a.max_attempts,
            from_block: a.from_block,
            to_block: a.to_block,
            direction: a.direction,
            confirmations: a.confirmations,
            parallelism: a.parallelism,
            checkpoint: a.checkpoint.clone(),
            pool_cache: a.pool_cache.clone(),
            fixture: a.fixture.clone(),
            out: a.out.clone(),
            ..classify_overrides(&a.classify)
        },
        Command::Report(a) => ConfigFile {
            out: a.out.clone(),
            format: a.format,
            epoch_start: a.epoch_start.clone(),
            bucket_days: a.bucket_days,
            exclusions: a.exclusions.clone(),
            usd_rates: a.usd_rates.clone(),
            ..ConfigFile::default()
        },
        Command::Synth(_) => ConfigFile::default(),
        Command::Verify(a) => ConfigFile {
            fixture: a.fixture.clone(),
            pool_cache: a.pool_cache.clone(),
            ..classify_overrides(&a.classify)
        },
    }
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, interrupt: &AtomicBool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli, interrupt) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli, interrupt: &AtomicBool) -> Result<i32, Failure> {
    // `verify --dir` supplies the config path when none is given.
    let config_path = match (&cli.config, &cli.command) {
        (Some(p), _) => Some(p.clone()),
        (None, Command::Verify(VerifyArgs { dir: Some(d), .. })) => Some(d.join(CONFIG_FILE)),
        _ => None,
    };
    let rc = RunConfig::resolve(config_path.as_deref(), overrides(&cli.command)).map_err(config_err)?;
    if cli.show_config {
        print!("{}", rc.redacted_json());
        return Ok(EXIT_OK);
    }
    match &cli.command {
        Command::Scan(a) => cmd_scan(&rc, a, interrupt),
        Command::Report(a) => cmd_report(&rc, a),
        Command::Synth(a) => cmd_synth(a),
        Command::Verify(a) => cmd_verify(&rc, a),
    }
}

fn cmd_scan(rc: &RunConfig, args: &ScanArgs, interrupt: &AtomicBool) -> Result<i32, Failure> {
    let s = &rc.settings;
    let out = s.out.clone().ok_or_else(|| config_err("scan needs --out"))?;
    let checkpoint = s
        .checkpoint
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.ckpt", out.display())));
    let pools = match &s.pool_cache {
        Some(p) => load_pools(p).map_err(pool_failure)?,
        None => Default::default(),
    };

    let fixture;
    let rpc;
    let (source, caller, range): (&dyn BlockSource, _, BlockRange) = if let Some(path) = &s.fixture {
        fixture = FixtureSource::load(path).map_err(fixture_failure)?;
        let range = match (fixture.extent(), s.from_block, s.to_block) {
            (_, Some(a), Some(b)) => BlockRange::new(a, b),
            (Some((lo, hi)), a, b) => BlockRange::new(a.unwrap_or(lo), b.unwrap_or(hi)),
            // An empty fixture with an open range scans nothing.
            (None, _, _) => BlockRange::new(1, 0),
        };
        (&fixture, None, range)
    } else if let Some(url) = &s.rpc_url {
        let mut cfg = RpcConfig::new(url.clone());
        cfg.auth_header = s.auth_header.clone();
        cfg.timeout = Duration::from_secs(s.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS));
        cfg.max_attempts = s.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS);
        rpc = RpcClient::new(cfg);
        let head = rpc.head().map_err(fetch_failure)?;
        let depth = s.confirmations.unwrap_or(DEFAULT_CONFIRMATIONS);
        let safe = head.checked_sub(depth).ok_or_else(|| {
            config_err(format!("chain head {head} is shallower than {depth} confirmations"))
        })?;
        let to = s.to_block.unwrap_or(safe);
        if to > safe {
            return Err(config_err(format!(
                "--to-block {to} is within {depth} blocks of head {head}; the highest allowed is {safe}"
            )));
        }
        let from = s.from_block.ok_or_else(|| config_err("node scans need --from-block"))?;
        (&rpc, Some(&rpc as &dyn crate::source::ContractCaller), BlockRange::new(from, to))
    } else {
        return Err(config_err("scan needs --fixture or --rpc-url"));
    };

    let job = ScanJob {
        source,
        caller,
        pools,
        classifier: &rc.classifier,
        range,
        direction: s.direction.unwrap_or(Direction::Forward),
        fixture_mode: s.fixture.is_some(),
        out: out.clone(),
        checkpoint,
        reset_checkpoint: args.reset_checkpoint,
        parallelism: s.parallelism.unwrap_or(DEFAULT_PARALLELISM),
        stop_after: args.stop_after_blocks,
        interrupt: Some(interrupt),
        pool_cache: s.pool_cache.clone(),
    };
    let report = run_scan(&job).map_err(scan_failure)?;
    if let Some(at) = report.resumed_at {
        log::info!("resumed at block cursor {at}");
    }
    log::info!(
        "{} blocks, {} transactions, {} spam-based and {} FastLane-based arbitrages, {} swap legs skipped, {} pools discovered",
        report.blocks,
        report.transactions,
        report.aa_spam,
        report.aa_fastlane,
        report.skipped_legs,
        report.pools_discovered
    );
    if report.complete {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "stopped before the end of {}..={}; progress saved to {}, rerun the same command to resume",
            range.start,
            range.end,
            job.checkpoint.display()
        );
        Ok(EXIT_PARTIAL)
    }
}

fn open_records(path: &Path) -> Result<RecordReader<BufReader<File>>, Failure> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(RecordReader::new(BufReader::new(f)))
}

fn cmd_report(rc: &RunConfig, args: &ReportArgs) -> Result<i32, Failure> {
    let s = &rc.settings;
    let extra: Vec<&Path> = s.exclusions.as_deref().into_iter().collect();
    let exclusions = load_exclusions(&extra).map_err(config_err)?;
    let rates = s.usd_rates.as_deref().map(load_usd_rates).transpose().map_err(config_err)?;
    let bucket_secs = s.bucket_days.unwrap_or(DEFAULT_BUCKET_DAYS) * DAY_SECS;
    let bad_line = |e: crate::records::RecordReadError| data_err(format!("{}: {e}", args.input.display()));

    let epoch = match &s.epoch_start {
        Some(iso) => parse_iso8601(iso).map_err(config_err)?,
        None => {
            let mut first: Option<u64> = None;
            for c in open_records(&args.input)? {
                let c = c.map_err(bad_line)?;
                if !exclusions.contains(&c.tx_hash) {
                    first = Some(first.map_or(c.timestamp, |f| f.min(c.timestamp)));
                }
            }
            first.unwrap_or(0)
        }
    };

    let mut agg = Aggregator::new(epoch, bucket_secs, &exclusions, rates.as_ref()).map_err(config_err)?;
    for c in open_records(&args.input)? {
        agg.push(&c.map_err(bad_line)?);
    }
    if !agg.skipped().is_empty() {
        log::warn!("{} records before the epoch start were skipped", agg.skipped().len());
    }
    if agg.excluded() > 0 {
        log::info!("{} excluded records dropped", agg.excluded());
    }
    let rows = agg.rows();
    let format = s.format.unwrap_or_default();
    match &s.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| io_err(path, e))?;
            write_report(BufWriter::new(f), &rows, format).map_err(|e| io_err(path, e))?;
        }
        None => write_report(io::stdout().lock(), &rows, format).map_err(|e| io_err(Path::new("<stdout>"), e))?,
    }
    Ok(EXIT_OK)
}

fn cmd_synth(args: &SynthArgs) -> Result<i32, Failure> {
    let mut plan = match &args.plan {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str::<SynthPlan>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => SynthPlan::default(),
    };
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(n) = args.block_count {
        plan.block_count = n;
    }
    let out = generate(&plan).map_err(config_err)?;
    write_synth(&args.out_dir, &out).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    let plan_path = args.out_dir.join("plan.json");
    let mut text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    text.push('\n');
    std::fs::write(&plan_path, text).map_err(|e| io_err(&plan_path, e))?;
    let aa = out.truth.values().filter(|t| t.is_aa).count();
    println!(
        "wrote {} blocks, {} transactions ({aa} planted arbitrages) to {}",
        out.blocks.len(),
        out.transaction_count(),
        args.out_dir.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(rc: &RunConfig, args: &VerifyArgs) -> Result<i32, Failure> {
    let in_dir = |name: &str| args.dir.as_ref().map(|d| d.join(name));
    let need = |p: Option<PathBuf>, flag: &str| p.ok_or_else(|| config_err(format!("verify needs --{flag} or --dir")));
    let fixture = need(rc.settings.fixture.clone().or_else(|| in_dir(FIXTURE_FILE)), "fixture")?;
    let truth = need(args.truth.clone().or_else(|| in_dir(TRUTH_FILE)), "truth")?;
    let pools = need(rc.settings.pool_cache.clone().or_else(|| in_dir(POOLS_FILE)), "pool-cache")?;

    let blocks = crate::fixture::load_fixture(&fixture).map_err(fixture_failure)?;
    let truth = load_truth(&truth).map_err(data_err)?;
    let pools = load_pools(&pools).map_err(pool_failure)?;
    let report = check_agreement(&blocks, &pools, &rc.classifier, &truth);

    let mut stdout = io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{} transactions, {} arbitrages ({} FastLane-based)",
        report.transactions, report.aa, report.fastlane
    );
    for (kind, n) in &report.by_kind {
        let _ = writeln!(stdout, "  {kind}: {n}");
    }
    for m in &report.mismatches {
        let _ = writeln!(stdout, "MISMATCH {}: {}", m.tx_hash, m.detail);
    }
    let agreeing = report.transactions.saturating_sub(report.mismatches.len());
    let _ = writeln!(
        stdout,
        "agreement: {agreeing}/{} ({})",
        report.transactions,
        if report.is_perfect() { "100%" } else { "FAILED" }
    );
    Ok(if report.is_perfect() { EXIT_OK } else { EXIT_MISMATCH })
}
