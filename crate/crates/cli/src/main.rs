use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use detml_core::lint::{lint_project, project_facts, LintOptions, LintReport, EXIT_CLEAN, EXIT_FINDINGS, EXIT_TOOL_FAILURE};
use detml_core::rules::{builtin_rules, load_rules, RuleCatalog, BUILTIN_CATALOG_VERSION};
use detml_core::scaffold::{
    apply_sync, builtin_templates, check_for_update, compute_sync, create_project, load_templates, select_template,
    ProjectConfig, SyncDiff, TemplateDescriptor,
};
use detml_core::sysintel::{
    build_manifest, collect_report, parse_key_values, parse_value, render_report, FixtureProbe, LinuxProbe,
    ReportFormat, SystemProbe,
};
use detml_core::{Version, TOOL_VERSION};
use serde_json::json;

// println! panics once the reader has gone away (`detml rules list | head`)
macro_rules! out {
    ($($arg:tt)*) => {
        if let Err(e) = writeln!(io::stdout(), $($arg)*) {
            quit_on_closed_stdout(e);
        }
    };
}

fn quit_on_closed_stdout(e: io::Error) {
    if e.kind() == io::ErrorKind::BrokenPipe {
        std::process::exit(EXIT_CLEAN);
    }
}

static VERSION: LazyLock<String> =
    LazyLock::new(|| format!("{TOOL_VERSION} (rule catalog {BUILTIN_CATALOG_VERSION})"));

#[derive(Parser)]
#[command(name = "detml", version = VERSION.as_str(), about = "Determinism checks, templates and provenance reports for ML training projects")]
#[command(arg_required_else_help = true, propagate_version = true)]
struct Cli {
    /// Colorize text output.
    #[arg(long, global = true, value_enum, default_value_t = Color::Auto)]
    color: Color,
    /// More log output on stderr (repeat up to three times).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Rule file overlaid on the built-in catalog.
    #[arg(long, global = true, value_name = "FILE")]
    rules: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Color {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum JsonOrHtml {
    Json,
    Html,
}

impl From<JsonOrHtml> for ReportFormat {
    fn from(f: JsonOrHtml) -> Self {
        match f {
            JsonOrHtml::Json => ReportFormat::Json,
            JsonOrHtml::Html => ReportFormat::Html,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a project for missing determinism settings and forbidden operations.
    Lint(LintArgs),
    /// Create a project from a template.
    Create(CreateArgs),
    /// Bring a project up to a newer template version.
    Sync(SyncArgs),
    /// Inspect available templates.
    Templates {
        #[command(subcommand)]
        command: TemplatesCmd,
    },
    /// Report the hardware of this machine.
    Report(ReportArgs),
    /// Assemble a run manifest (hyperparameters, metrics, environment, hardware).
    Manifest(ManifestArgs),
    /// Inspect the rule catalog.
    Rules {
        #[command(subcommand)]
        command: RulesCmd,
    },
}

#[derive(Args)]
struct LintArgs {
    /// Project root.
    #[arg(default_value = ".")]
    path: PathBuf,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
    /// Treat warnings as errors.
    #[arg(long)]
    strict: bool,
    /// Fail when the template stamp is missing or unreadable.
    #[arg(long)]
    require_stamp: bool,
    /// Files to lint (glob over root-relative paths; default `**/*.py`).
    #[arg(long = "include", value_name = "GLOB")]
    include: Vec<String>,
    #[arg(long = "exclude", value_name = "GLOB")]
    exclude: Vec<String>,
    /// Environment manifest checked for pinned versions.
    #[arg(long, value_name = "FILE")]
    env_manifest: Option<PathBuf>,
    /// Print the extracted facts of every file as JSON instead of linting.
    #[arg(long)]
    dump_facts: bool,
}

#[derive(Args)]
struct TemplateSource {
    /// Directory with additional templates (one subdirectory per template version).
    #[arg(long, value_name = "DIR")]
    template_dir: Option<PathBuf>,
}

impl TemplateSource {
    fn available(&self) -> Result<Vec<TemplateDescriptor>, String> {
        let mut all = builtin_templates();
        if let Some(dir) = &self.template_dir {
            all.extend(load_templates(dir).map_err(|e| e.to_string())?);
        }
        Ok(all)
    }
}

#[derive(Args)]
struct CreateArgs {
    #[arg(long, short)]
    template: String,
    /// Exact template version (default: newest available).
    #[arg(long, value_name = "VERSION")]
    template_version: Option<Version>,
    #[command(flatten)]
    source: TemplateSource,
    /// Variable answer; repeatable.
    #[arg(long = "var", value_name = "KEY=VALUE")]
    vars: Vec<String>,
    /// Never prompt; unanswered variables take their defaults.
    #[arg(long)]
    no_input: bool,
    dest: PathBuf,
}

#[derive(Args)]
struct SyncArgs {
    /// Project root.
    #[arg(default_value = ".")]
    project: PathBuf,
    /// Only show what would change.
    #[arg(long)]
    check_only: bool,
    /// Target version (default: newest available).
    #[arg(long, value_name = "VERSION")]
    to: Option<Version>,
    #[command(flatten)]
    source: TemplateSource,
    #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
    format: TextOrJson,
}

#[derive(Subcommand)]
enum TemplatesCmd {
    /// List template names and versions.
    List {
        #[command(flatten)]
        source: TemplateSource,
        #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
        format: TextOrJson,
    },
}

#[derive(Subcommand)]
enum RulesCmd {
    /// List rules sorted by id.
    List {
        #[arg(long, value_enum, default_value_t = TextOrJson::Text)]
        format: TextOrJson,
    },
}

#[derive(Args)]
struct ProbeSource {
    /// Replay recorded probe answers from a JSON file instead of reading this machine.
    #[arg(long, value_name = "FILE")]
    probe_fixture: Option<PathBuf>,
}

impl ProbeSource {
    fn probe(&self) -> Result<Box<dyn SystemProbe>, String> {
        match &self.probe_fixture {
            None => Ok(Box::new(LinuxProbe)),
            Some(path) => {
                let text = read_text(path)?;
                let probe = FixtureProbe::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                Ok(Box::new(probe))
            }
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = JsonOrHtml::Json)]
    format: JsonOrHtml,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeSource,
}

#[derive(Args)]
struct ManifestArgs {
    /// Hyperparameters as a flat key=value file.
    #[arg(long, value_name = "FILE")]
    params: PathBuf,
    /// Metrics as a flat key=value file.
    #[arg(long, value_name = "FILE")]
    metrics: PathBuf,
    /// Environment manifest whose content hash is recorded.
    #[arg(long, value_name = "FILE")]
    env: PathBuf,
    /// Source revision (default: `git rev-parse HEAD` when available).
    #[arg(long, value_name = "REV")]
    revision: Option<String>,
    #[arg(long, value_enum, default_value_t = JsonOrHtml::Json)]
    format: JsonOrHtml,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeSource,
}

struct Ctx {
    color: bool,
    rules: Option<PathBuf>,
}

type CmdResult = Result<i32, String>;

fn read_text(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => match io::stdout().write_all(bytes) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            r => r.map_err(|e| e.to_string()),
        },
    }
}

fn print_json(value: &serde_json::Value) -> Result<(), String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    s.push('\n');
    emit(None, s.as_bytes())
}

impl Ctx {
    fn catalog(&self) -> Result<RuleCatalog, String> {
        match &self.rules {
            None => Ok(builtin_rules()),
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
                load_rules(&bytes).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }
}

fn lint(ctx: &Ctx, args: LintArgs) -> CmdResult {
    let catalog = ctx.catalog()?;
    let mut options = LintOptions { strict: args.strict, require_stamp: args.require_stamp, ..Default::default() };
    if !args.include.is_empty() {
        options.include = args.include;
    }
    options.exclude = args.exclude;
    options.env_manifest = args.env_manifest;
    if args.dump_facts {
        let sets = project_facts(&args.path, &options).map_err(|e| e.to_string())?;
        print_json(&serde_json::to_value(&sets).map_err(|e| e.to_string())?)?;
        return Ok(EXIT_CLEAN);
    }
    let report = lint_project(&args.path, &catalog, &options).map_err(|e| e.to_string())?;
    match args.format {
        TextOrJson::Json => emit(None, report.to_json().as_bytes())?,
        TextOrJson::Text => {
            print_diagnostics(&report);
            emit(None, report.to_text(ctx.color).as_bytes())?;
        }
    }
    Ok(report.exit_code)
}

fn print_diagnostics(report: &LintReport) {
    for file in &report.files {
        for d in &file.diagnostics {
            eprintln!("note: {}: {}", d.location, d.message);
        }
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
}

fn parse_vars(vars: &[String]) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for v in vars {
        let (k, val) = v.split_once('=').ok_or_else(|| format!("--var expects KEY=VALUE, got `{v}`"))?;
        out.insert(k.trim().to_string(), val.to_string());
    }
    Ok(out)
}

fn prompt_missing(template: &TemplateDescriptor, answers: &mut BTreeMap<String, String>) -> Result<(), String> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    for var in &template.variables {
        if answers.contains_key(&var.key) {
            continue;
        }
        loop {
            eprint!("{} [{}]: ", var.prompt, var.default);
            let _ = io::stderr().flush();
            let line = match lines.next() {
                Some(l) => l.map_err(|e| e.to_string())?,
                None => String::new(),
            };
            let value = line.trim();
            let value = if value.is_empty() { var.default.as_str() } else { value };
            if var.accepts(value) {
                answers.insert(var.key.clone(), value.to_string());
                break;
            }
            eprintln!("`{value}` does not match `{}`", var.regex);
        }
    }
    Ok(())
}

fn create(args: CreateArgs) -> CmdResult {
    let available = args.source.available()?;
    let template = select_template(&available, &args.template, args.template_version.as_ref()).map_err(|e| e.to_string())?;
    let mut answers = parse_vars(&args.vars)?;
    if !args.no_input && io::stdin().is_terminal() {
        prompt_missing(template, &mut answers)?;
    }
    let root = create_project(template, &answers, &args.dest).map_err(|e| e.to_string())?;
    eprintln!("created {} from template {} {}", root.display(), template.name, template.version);
    Ok(EXIT_CLEAN)
}

fn print_sync_diff(diff: &SyncDiff) {
    out!("{} {} -> {}", diff.template, diff.from_version, diff.to_version);
    for p in &diff.added {
        out!("added    {p}");
    }
    for p in &diff.removed {
        out!("removed  {p}");
    }
    for m in &diff.modified {
        out!("modified {}", m.path);
    }
    for m in &diff.modified {
        if let Err(e) = write!(io::stdout(), "{}", m.diff) {
            quit_on_closed_stdout(e);
        }
    }
}

fn sync(args: SyncArgs) -> CmdResult {
    let available = args.source.available()?;
    let stamp = ProjectConfig::load(&args.project).map_err(|e| format!("{}: {e}", args.project.display()))?;
    let target = match &args.to {
        Some(v) => Some(v.clone()),
        None => check_for_update(&stamp, &available).map_err(|e| e.to_string())?,
    };
    let Some(target) = target else {
        match args.format {
            TextOrJson::Json => print_json(&json!({
                "template": stamp.template_name,
                "from_version": stamp.template_version.to_string(),
                "to_version": stamp.template_version.to_string(),
                "up_to_date": true,
            }))?,
            TextOrJson::Text => out!("{} {} is up to date", stamp.template_name, stamp.template_version),
        }
        return Ok(EXIT_CLEAN);
    };
    let template = select_template(&available, &stamp.template_name, Some(&target)).map_err(|e| e.to_string())?;
    let diff = compute_sync(&args.project, template).map_err(|e| e.to_string())?;
    if args.check_only {
        match args.format {
            TextOrJson::Json => print_json(&serde_json::to_value(&diff).map_err(|e| e.to_string())?)?,
            TextOrJson::Text => print_sync_diff(&diff),
        }
        return Ok(EXIT_CLEAN);
    }
    let result = apply_sync(&args.project, &diff).map_err(|e| e.to_string())?;
    match args.format {
        TextOrJson::Json => print_json(&json!({
            "template": diff.template,
            "from_version": diff.from_version.to_string(),
            "to_version": diff.to_version.to_string(),
            "applied": result.applied,
            "conflicted": result.conflicted,
        }))?,
        TextOrJson::Text => {
            for p in &result.applied {
                out!("applied    {p}");
            }
            for p in &result.conflicted {
                out!("conflicted {p}");
            }
        }
    }
    if result.conflicted.is_empty() {
        eprintln!("synced {} {} -> {}", diff.template, diff.from_version, diff.to_version);
        Ok(EXIT_CLEAN)
    } else {
        eprintln!("{} file(s) need manual merging; the stamp stays at {}", result.conflicted.len(), diff.from_version);
        Ok(EXIT_FINDINGS)
    }
}

fn templates_list(source: TemplateSource, format: TextOrJson) -> CmdResult {
    let mut all = source.available()?;
    all.sort_by(|a, b| (&a.name, &a.version).cmp(&(&b.name, &b.version)));
    match format {
        TextOrJson::Json => {
            let items: Vec<_> = all
                .iter()
                .map(|t| {
                    json!({
                        "name": t.name,
                        "version": t.version.to_string(),
                        "description": t.description,
                        "variables": t.variables,
                        "files": t.files.keys().collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&serde_json::Value::Array(items))?;
        }
        TextOrJson::Text => {
            for t in &all {
                out!("{} {} {}", t.name, t.version, t.description);
            }
        }
    }
    Ok(EXIT_CLEAN)
}

fn rules_list(ctx: &Ctx, format: TextOrJson) -> CmdResult {
    let catalog = ctx.catalog()?;
    match format {
        TextOrJson::Json => {
            let rules: Vec<_> = catalog.iter().collect();
            print_json(&json!({
                "catalog_version": catalog.catalog_version.to_string(),
                "rules": serde_json::to_value(rules).map_err(|e| e.to_string())?,
            }))?;
        }
        TextOrJson::Text => {
            for r in catalog.iter() {
                out!("{} {} {} {} [{}]", r.id, r.severity, r.library.as_str(), r.message, r.paper_anchor);
            }
        }
    }
    Ok(EXIT_CLEAN)
}

fn report(args: ReportArgs) -> CmdResult {
    let probe = args.probe.probe()?;
    let report = collect_report(probe.as_ref());
    for e in &report.probe_errors {
        log::warn!("probe: {e}");
    }
    emit(args.out.as_deref(), &render_report(&report, args.format.into()))?;
    Ok(EXIT_CLEAN)
}

fn git_head() -> Option<String> {
    let out = Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let rev = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!rev.is_empty()).then_some(rev)
}

fn manifest(args: ManifestArgs) -> CmdResult {
    let typed = |path: &Path| -> Result<BTreeMap<String, serde_json::Value>, String> {
        let kv = parse_key_values(&read_text(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(kv.into_iter().map(|(k, v)| (k, parse_value(&v))).collect())
    };
    let params = typed(&args.params)?;
    let metrics = typed(&args.metrics)?;
    let env = fs::read(&args.env).map_err(|e| format!("{}: {e}", args.env.display()))?;
    let revision = args.revision.or_else(git_head);
    let probe = args.probe.probe()?;
    let manifest = build_manifest(collect_report(probe.as_ref()), &params, &metrics, revision, &env)
        .map_err(|e| e.to_string())?;
    emit(args.out.as_deref(), &render_report(&manifest, args.format.into()))?;
    Ok(EXIT_CLEAN)
}

fn run(cli: Cli) -> CmdResult {
    let color = match cli.color {
        Color::On => true,
        Color::Off => false,
        Color::Auto => io::stdout().is_terminal() && std::env::var_os("NO_COLOR").is_none(),
    };
    let ctx = Ctx { color, rules: cli.rules };
    match cli.command {
        Cmd::Lint(args) => lint(&ctx, args),
        Cmd::Create(args) => create(args),
        Cmd::Sync(args) => sync(args),
        Cmd::Templates { command: TemplatesCmd::List { source, format } } => templates_list(source, format),
        Cmd::Report(args) => report(args),
        Cmd::Manifest(args) => manifest(args),
        Cmd::Rules { command: RulesCmd::List { format } } => rules_list(&ctx, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_TOOL_FAILURE } else { EXIT_CLEAN };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();

    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_TOOL_FAILURE as u8)
        }
    }
}
