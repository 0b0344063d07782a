//! Command-line surface for the NV-1 digital twin: simulate netlists or
//! boot images, assemble and disassemble boot images, validate programs,
//! and run the performance, power, and cross-device comparison reports.
//!
//! Every run is a deterministic function of its arguments and input
//! files: no timestamps, no hidden state. Exit codes: 0 success, 1 input
//! or validation error, 2 runtime contract violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nv1_core::config::{SlotMode, SystemConfig, DEFAULT_CLOCK_HZ, NODES_PER_CHIP};
use nv1_core::interconnect::plan_chips;
use nv1_core::loader::{decode_boot_image, encode_boot_image, parse_netlist, NetlistDoc, MAGIC};
use nv1_core::model::{validate_system, NodeId, NodeProgram, Word};
use nv1_core::perf::{
    builtin_dataset, chip_current, compare_report, load_dataset, multi_chip_bandwidth_note,
    paper_check, peak_bandwidth, report_to_csv, report_to_text, DinCondition, BITS_PER_READ,
    BYTES_PER_OP,
};
use nv1_core::sim::{stats_to_csv, summarize, trace_to_csv, InputSchedule, SimError, Simulator};

#[derive(Parser)]
#[command(
    name = "nv1",
    version,
    about = "NV-1 digital twin: simulator, toolchain, and performance model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Dense,
    Sparse,
}

#[derive(Args)]
struct GeometryArgs {
    /// Total node count; defaults to the smallest count covering the
    /// programmed ids.
    #[arg(long)]
    nodes: Option<u32>,
    /// Nodes per chip; defaults to the total (single die).
    #[arg(long)]
    nodes_per_chip: Option<u32>,
    /// Lift the 21-chiplet chaining limit.
    #[arg(long)]
    no_chip_limit: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a netlist or boot image for a number of epochs.
    Sim {
        /// Netlist text file, or one boot image per chip.
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        epochs: u32,
        #[arg(long, value_enum, default_value_t = Mode::Dense)]
        mode: Mode,
        /// Per-epoch host inputs CSV: epoch,node_id,value.
        #[arg(long)]
        inputs_file: Option<PathBuf>,
        /// Trace CSV output path (default: <input>.trace.csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Stats CSV output path (default: <input>.stats.csv).
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CLOCK_HZ)]
        clock_hz: u64,
        /// Stop early when an epoch changes no node output.
        #[arg(long)]
        halt_on_fixed_point: bool,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Assemble a netlist into per-chip boot images.
    Asm {
        netlist: PathBuf,
        /// Output stem; images land at <stem>.nv1b or <stem>.chip<k>.nv1b.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Disassemble boot images back into a canonical netlist.
    Disasm {
        images: Vec<PathBuf>,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a netlist or boot image against the architectural limits.
    Validate {
        input: PathBuf,
        #[command(flatten)]
        geometry: GeometryArgs,
    },
    /// Peak connection-memory bandwidth figures.
    Perf {
        #[arg(long, default_value_t = NODES_PER_CHIP as u64)]
        nodes: u64,
        #[arg(long, default_value_t = 50.0)]
        clock_mhz: f64,
        #[arg(long, default_value_t = BITS_PER_READ)]
        bits_per_read: u32,
        /// Also report the multi-chip scaling for this many chips.
        #[arg(long)]
        chips: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Chip supply-current and power sweep over clock frequency.
    Power {
        /// Data-input condition: din-vss, din-dvdd, din-quarter-clk, din-half-clk.
        #[arg(long, default_value = "din-vss")]
        condition: String,
        #[arg(long, default_value_t = 0.0)]
        from_mhz: f64,
        #[arg(long, default_value_t = 50.0)]
        to_mhz: f64,
        #[arg(long, default_value_t = 5.0)]
        step_mhz: f64,
        #[arg(long, default_value_t = 0.9)]
        volts: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Cross-device utilization, power, and efficiency comparison.
    Compare {
        /// Dataset CSV; the built-in comparison dataset when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = BYTES_PER_OP)]
        bytes_per_op: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Run the built-in golden assertions and report pass/fail.
        #[arg(long)]
        paper_check: bool,
    },
}

/// Input error: bad files, bad syntax, failed validation.
const EXIT_INPUT: u8 = 1;
/// Contract violation while running: host I/O or protocol errors.
const EXIT_RUNTIME: u8 = 2;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSystem(_) | SimError::InvalidConfig(_) => {
                CliError::input(e.to_string())
            }
            SimError::HostIo { .. } | SimError::Protocol(_) => CliError::runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sim {
            inputs,
            epochs,
            mode,
            inputs_file,
            trace,
            stats,
            clock_hz,
            halt_on_fixed_point,
            geometry,
        } => cmd_sim(
            &inputs,
            epochs,
            mode,
            inputs_file.as_deref(),
            trace,
            stats,
            clock_hz,
            halt_on_fixed_point,
            &geometry,
        ),
        Command::Asm {
            netlist,
            out,
            geometry,
        } => cmd_asm(&netlist, out, &geometry),
        Command::Disasm { images, out } => cmd_disasm(&images, out.as_deref()),
        Command::Validate { input, geometry } => cmd_validate(&input, &geometry),
        Command::Perf {
            nodes,
            clock_mhz,
            bits_per_read,
            chips,
            format,
        } => cmd_perf(nodes, clock_mhz, bits_per_read, chips, format),
        Command::Power {
            condition,
            from_mhz,
            to_mhz,
            step_mhz,
            volts,
            format,
        } => cmd_power(&condition, from_mhz, to_mhz, step_mhz, volts, format),
        Command::Compare {
            dataset,
            bytes_per_op,
            format,
            paper_check: check,
        } => cmd_compare(dataset.as_deref(), bytes_per_op, format, check),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn is_boot_image(bytes: &[u8]) -> bool {
    bytes.len() >= 4 && bytes[..4] == MAGIC
}

/// Loads programs from either a netlist or a set of boot images.
fn load_programs(inputs: &[PathBuf]) -> Result<Vec<NodeProgram>, CliError> {
    if inputs.is_empty() {
        return Err(CliError::input("no input files given"));
    }
    let first = read_file(&inputs[0])?;
    if is_boot_image(&first) {
        let mut programs = Vec::new();
        for path in inputs {
            let bytes = read_file(path)?;
            let image = decode_boot_image(&bytes)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            programs.extend(image.programs);
        }
        Ok(programs)
    } else {
        if inputs.len() > 1 {
            return Err(CliError::input(
                "multiple inputs are only supported for boot images",
            ));
        }
        let text = String::from_utf8(first)
            .map_err(|_| CliError::input(format!("{}: not valid UTF-8", inputs[0].display())))?;
        let doc = parse_netlist(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", inputs[0].display())))?;
        Ok(doc.to_programs())
    }
}

/// Geometry from flags, defaulting to the smallest single die covering
/// the programmed ids.
fn resolve_config(programs: &[NodeProgram], geometry: &GeometryArgs) -> SystemConfig {
    let max_id = programs
        .iter()
        .map(|p| u32::from(p.id.0))
        .max()
        .unwrap_or(0);
    let total = geometry.nodes.unwrap_or(max_id + 1);
    let per_chip = geometry.nodes_per_chip.unwrap_or(total);
    let mut cfg = SystemConfig::with_geometry(total, per_chip);
    cfg.enforce_chip_limit = !geometry.no_chip_limit;
    cfg
}

/// Parses the host-input CSV: epoch,node_id,value with a header row.
fn parse_input_schedule(text: &str, path: &Path) -> Result<InputSchedule, CliError> {
    let mut schedule = InputSchedule::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "epoch,node_id,value" {
                return Err(CliError::input(format!(
                    "{}: expected header 'epoch,node_id,value'",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let bad = || {
            CliError::input(format!(
                "{}: line {}: bad row '{line}'",
                path.display(),
                i + 1
            ))
        };
        let epoch: u32 = fields
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let node: u16 = fields
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        let value: Word = fields
            .next()
            .ok_or_else(bad)?
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if fields.next().is_some() {
            return Err(bad());
        }
        schedule
            .entry(epoch)
            .or_default()
            .push((NodeId(node), value));
    }
    Ok(schedule)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sim(
    inputs: &[PathBuf],
    epochs: u32,
    mode: Mode,
    inputs_file: Option<&Path>,
    trace_path: Option<PathBuf>,
    stats_path: Option<PathBuf>,
    clock_hz: u64,
    halt_on_fixed_point: bool,
    geometry: &GeometryArgs,
) -> Result<(), CliError> {
    let programs = load_programs(inputs)?;
    let mut cfg = resolve_config(&programs, geometry);
    cfg.max_epochs = epochs;
    cfg.clock_hz = clock_hz;
    cfg.halt_on_fixed_point = halt_on_fixed_point;
    cfg.mode = match mode {
        Mode::Dense => SlotMode::Dense,
        Mode::Sparse => SlotMode::Sparse,
    };

    let schedule = match inputs_file {
        Some(path) => {
            let text = String::from_utf8(read_file(path)?)
                .map_err(|_| CliError::input(format!("{}: not valid UTF-8", path.display())))?;
            parse_input_schedule(&text, path)?
        }
        None => InputSchedule::new(),
    };

    let mut sim = Simulator::new(programs, cfg.clone())?;
    let out = sim.run(&schedule)?;

    let stem = inputs[0].with_extension("");
    let trace_path = trace_path.unwrap_or_else(|| stem.with_extension("trace.csv"));
    let stats_path = stats_path.unwrap_or_else(|| stem.with_extension("stats.csv"));
    write_file(&trace_path, trace_to_csv(&out.trace).as_bytes())?;
    write_file(&stats_path, stats_to_csv(&out.per_epoch).as_bytes())?;
    print!("{}", summarize(&out.totals, &cfg, out.fixed_point));
    println!("trace written to    : {}", trace_path.display());
    println!("stats written to    : {}", stats_path.display());
    Ok(())
}

fn cmd_asm(netlist: &Path, out: Option<PathBuf>, geometry: &GeometryArgs) -> Result<(), CliError> {
    let text = String::from_utf8(read_file(netlist)?)
        .map_err(|_| CliError::input(format!("{}: not valid UTF-8", netlist.display())))?;
    let doc =
        parse_netlist(&text).map_err(|e| CliError::input(format!("{}: {e}", netlist.display())))?;
    let programs = doc.to_programs();
    let cfg = resolve_config(&programs, geometry);
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
    let violations = validate_system(&programs, &cfg);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        return Err(CliError::input(format!(
            "validation failed:\n{}",
            lines.join("\n")
        )));
    }

    let plan = plan_chips(cfg.total_nodes, cfg.nodes_per_chip, cfg.enforce_chip_limit)
        .map_err(|e| CliError::input(e.to_string()))?;
    let images = encode_boot_image(&programs, &plan).map_err(|e| CliError::input(e.to_string()))?;

    let stem = out.unwrap_or_else(|| netlist.with_extension(""));
    if images.len() == 1 {
        let path = stem.with_extension("nv1b");
        write_file(&path, &images[0])?;
        println!("wrote {}", path.display());
    } else {
        for (k, image) in images.iter().enumerate() {
            let path = stem.with_extension(format!("chip{k}.nv1b"));
            write_file(&path, image)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_disasm(images: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    if images.is_empty() {
        return Err(CliError::input("no image files given"));
    }
    let mut programs = Vec::new();
    for path in images {
        let bytes = read_file(path)?;
        let image = decode_boot_image(&bytes)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        programs.extend(image.programs);
    }
    let text = NetlistDoc::from_programs(&programs).emit();
    match out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_validate(input: &Path, geometry: &GeometryArgs) -> Result<(), CliError> {
    let programs = load_programs(std::slice::from_ref(&input.to_path_buf()))?;
    let cfg = resolve_config(&programs, geometry);
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
    let violations = validate_system(&programs, &cfg);
    if violations.is_empty() {
        println!(
            "ok: {} programs valid for {} nodes on {} chip(s)",
            programs.len(),
            cfg.total_nodes,
            cfg.chips()
        );
        Ok(())
    } else {
        let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
        Err(CliError::input(format!(
            "{} violation(s):\n{}",
            violations.len(),
            lines.join("\n")
        )))
    }
}

fn cmd_perf(
    nodes: u64,
    clock_mhz: f64,
    bits_per_read: u32,
    chips: Option<u64>,
    format: Format,
) -> Result<(), CliError> {
    let clock_hz = clock_mhz * 1e6;
    let single = peak_bandwidth(nodes, clock_hz, bits_per_read);
    match format {
        Format::Csv => {
            println!("nodes,clock_mhz,bits_per_read,bandwidth_gb_s");
            println!("{nodes},{clock_mhz},{bits_per_read},{single:.4}");
            if let Some(k) = chips {
                println!("# {}", multi_chip_bandwidth_note(k, clock_hz));
            }
        }
        Format::Text => {
            println!(
                "peak connection-memory bandwidth: {nodes} nodes x {clock_mhz} MHz x {bits_per_read} bits / 8 / 1024^3"
            );
            println!("  = {single:.2} GB/s (binary convention)");
            if let Some(k) = chips {
                println!("  {}", multi_chip_bandwidth_note(k, clock_hz));
            }
        }
    }
    Ok(())
}

fn cmd_power(
    condition: &str,
    from_mhz: f64,
    to_mhz: f64,
    step_mhz: f64,
    volts: f64,
    format: Format,
) -> Result<(), CliError> {
    let condition = DinCondition::from_name(condition).ok_or_else(|| {
        CliError::input(format!(
            "unknown condition '{condition}'; expected one of din-vss, din-dvdd, din-quarter-clk, din-half-clk"
        ))
    })?;
    if step_mhz <= 0.0 || to_mhz < from_mhz {
        return Err(CliError::input("sweep needs step > 0 and to >= from"));
    }
    let mut rows = Vec::new();
    let mut f = from_mhz;
    while f <= to_mhz + 1e-9 {
        let current = chip_current(f, condition);
        rows.push((f, current, current * volts));
        f += step_mhz;
    }
    match format {
        Format::Csv => {
            println!("freq_mhz,current_ma,power_mw");
            for (f, i, p) in rows {
                println!("{f},{i:.4},{p:.4}");
            }
        }
        Format::Text => {
            println!("chip current, {} at {volts} V", condition.name());
            for (f, i, p) in rows {
                println!("  {f:>6.2} MHz  {i:>8.2} mA  {p:>8.2} mW");
            }
        }
    }
    Ok(())
}

fn cmd_compare(
    dataset: Option<&Path>,
    bytes_per_op: f64,
    format: Format,
    check: bool,
) -> Result<(), CliError> {
    let specs = match dataset {
        Some(path) => load_dataset(path).map_err(|e| CliError::input(e.to_string()))?,
        None => builtin_dataset(),
    };
    if check {
        let checks = paper_check(&specs);
        let mut all_passed = true;
        for c in &checks {
            println!(
                "{} {} ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
            all_passed &= c.passed;
        }
        if !all_passed {
            return Err(CliError::input("golden checks failed"));
        }
        return Ok(());
    }
    let rows = compare_report(&specs, bytes_per_op);
    match format {
        Format::Csv => print!("{}", report_to_csv(&rows)),
        Format::Text => print!("{}", report_to_text(&rows)),
    }
    Ok(())
}
