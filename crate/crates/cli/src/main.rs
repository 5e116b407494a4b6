//! `kbest`: k best solutions of graph problems on bounded-treewidth graphs.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 invalid parameters,
//! 3 oracle mismatch, 4 invalid tree decomposition.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbest_core::error::{Error, EvalError, GraphError, TdError};
use kbest_core::eval::EvaluationTree;
use kbest_core::graph::{load_graph, CostModel, FeatureId, Solution, WeightedGraph};
use kbest_core::kbest::{k_best, k_best_direct, k_best_each, prepare, KBestStats, PrepStats};
use kbest_core::oracle::{enumerate_paths, enumerate_sorted, Predicate};
use kbest_core::problems::Problem;
use kbest_core::treedec::{balance, load_td, save_td, validate, TreeDecomposition};

/// Paths the oracle check enumerates before giving up.
const ORACLE_PATH_LIMIT: usize = 1_000_000;

#[derive(Parser)]
#[command(name = "kbest", version, about = "k best solutions on bounded-treewidth graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// k shortest simple s-t paths.
    Ksp {
        #[arg(long)]
        source: u32,
        #[arg(long)]
        target: u32,
        #[command(flatten)]
        common: Common,
    },
    /// k best solutions of a built-in problem.
    Solve {
        /// simple-path, spanning-tree, perfect-matching or vertex-cover.
        #[arg(long)]
        problem: String,
        #[arg(long)]
        source: Option<u32>,
        #[arg(long)]
        target: Option<u32>,
        /// Print the first N values of the single-pass top-k evaluation
        /// and compare them with the enumeration.
        #[arg(long, value_name = "N")]
        direct_k: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild a decomposition as a shallow binary one.
    Balance {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        td: PathBuf,
        /// Output file; the decomposition goes to stdout otherwise.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Check a decomposition against a graph.
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        td: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    graph: PathBuf,
    #[arg(short = 'k', long = "k")]
    k: usize,
    /// Use this decomposition instead of the min-fill heuristic.
    #[arg(long)]
    td: Option<PathBuf>,
    /// One JSON object per line with the solution's sets.
    #[arg(long)]
    solutions: bool,
    /// Compare against brute-force enumeration; exit 3 on a difference.
    #[arg(long)]
    oracle_check: bool,
    /// Sizes, timings and per-expansion copy counts on stderr.
    #[arg(long)]
    stats: bool,
    /// Treat the graph as undirected (0) or directed (1).
    #[arg(long, value_name = "0|1", value_parser = clap::value_parser!(u8).range(0..=1))]
    directed_override: Option<u8>,
    /// Print the parse tree on stderr.
    #[arg(long)]
    dump_parse_tree: bool,
}

struct Fail {
    code: u8,
    msg: String,
}

impl Fail {
    fn new(code: u8, msg: impl Into<String>) -> Fail {
        Fail { code, msg: msg.into() }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        let code = match e {
            Error::Graph(_) | Error::TreeDecomposition(TdError::Parse { .. }) => 1,
            _ => 2,
        };
        Fail::new(code, e.to_string())
    }
}

macro_rules! via_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Fail {
            fn from(e: $t) -> Fail {
                Error::from(e).into()
            }
        }
    )*};
}

via_error!(GraphError, EvalError, TdError);

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Fail {
        Fail::new(1, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Ksp { source, target, common } => run(&common, Problem::SimplePath { source, target }, None),
        Cmd::Solve {
            problem,
            source,
            target,
            direct_k,
            common,
        } => Problem::from_name(&problem, source, target)
            .map_err(|e| Fail::new(2, e.to_string()))
            .and_then(|p| run(&common, p, direct_k)),
        Cmd::Balance { graph, td, output } => cmd_balance(&graph, &td, output.as_deref()),
        Cmd::Validate { graph, td } => cmd_validate(&graph, &td),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.msg.is_empty() {
                eprintln!("kbest: {}", f.msg);
            }
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::new(1, format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Result<WeightedGraph, Fail> {
    load_graph(&read(path)?).map_err(|e| Fail::new(1, format!("{}: {e}", path.display())))
}

fn read_td(path: &Path) -> Result<TreeDecomposition, Fail> {
    load_td(&read(path)?).map_err(|e| Fail::new(1, format!("{}: {e}", path.display())))
}

fn with_direction(g: WeightedGraph, directed: bool) -> Result<WeightedGraph, Fail> {
    if g.is_directed() == directed {
        return Ok(g);
    }
    let edges = g
        .edges()
        .map(|(e, t, h)| (t, h, g.weight(FeatureId::edge(e))))
        .collect();
    let vw = (1..=g.n()).map(|v| g.weight(FeatureId::vertex(v))).collect();
    Ok(WeightedGraph::new(g.n(), directed, edges)?.with_vertex_weights(vw)?)
}

fn predicate(p: &Problem) -> Predicate {
    match *p {
        Problem::SimplePath { source, target } => Predicate::SimplePath { source, target },
        Problem::SpanningTree => Predicate::SpanningTree,
        Problem::PerfectMatching => Predicate::PerfectMatching,
        Problem::VertexCover => Predicate::VertexCover,
    }
}

fn json_line(value: i64, s: &Solution) -> String {
    let sets: Vec<Vec<String>> = s
        .sets()
        .iter()
        .map(|set| set.iter().map(|f| f.to_string()).collect())
        .collect();
    let sets = serde_json::to_string(&sets).expect("string lists serialize");
    format!("{{\"value\":{value},\"sets\":{sets}}}")
}

fn run(c: &Common, problem: Problem, direct_k: Option<usize>) -> Result<(), Fail> {
    if c.k == 0 {
        return Err(Fail::new(2, "k must be at least 1"));
    }
    let mut g = read_graph(&c.graph)?;
    if let Some(d) = c.directed_override {
        g = with_direction(g, d == 1)?;
    }
    let td = c.td.as_deref().map(read_td).transpose()?;
    let (plan, mut prep) = prepare(&g, &problem, td.as_ref())?;
    if c.dump_parse_tree {
        eprint!("{}", plan.tree().dump());
    }
    let out = io::stdout();
    let mut out = BufWriter::new(out.lock());

    if let Some(n) = direct_k {
        if c.solutions {
            return Err(Fail::new(2, "--direct-k yields values only"));
        }
        let direct = k_best_direct(&plan, n)?;
        for v in &direct {
            writeln!(out, "{v}")?;
        }
        out.flush()?;
        let mut et = EvaluationTree::build(plan)?;
        let full = k_best(&mut et, n, false)?;
        if c.stats {
            print_stats(&prep, &full.stats, full.values.len());
        }
        if full.values != direct {
            return Err(Fail::new(
                3,
                format!("direct {:?} differs from enumeration {:?}", direct, full.values),
            ));
        }
        return oracle_check(c, &g, &problem, n, &direct, None);
    }

    let t = std::time::Instant::now();
    let mut et = EvaluationTree::build(plan)?;
    prep.evaluate = t.elapsed();
    let mut values = Vec::new();
    let mut sols = Vec::new();
    let mut io_err = None;
    let mut emitted = 0;
    let stats = k_best_each(&mut et, c.k, c.solutions, |v, s| {
        let line = match &s {
            Some(s) => json_line(v, s),
            None => v.to_string(),
        };
        emitted += 1;
        if io_err.is_none() {
            if let Err(e) = writeln!(out, "{line}") {
                io_err = Some(e);
            }
        }
        if c.oracle_check {
            values.push(v);
            sols.extend(s);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e.into());
    }
    out.flush()?;
    if c.stats {
        print_stats(&prep, &stats, emitted);
    }
    oracle_check(c, &g, &problem, c.k, &values, c.solutions.then_some(&sols[..]))
}

fn oracle_check(
    c: &Common,
    g: &WeightedGraph,
    problem: &Problem,
    k: usize,
    values: &[i64],
    sols: Option<&[Solution]>,
) -> Result<(), Fail> {
    if !c.oracle_check {
        return Ok(());
    }
    let pred = predicate(problem);
    let all = match *problem {
        Problem::SimplePath { source, target } => enumerate_paths(g, source, target, ORACLE_PATH_LIMIT),
        _ => {
            let cost = CostModel::from_graph(g, &[pred.kind()]);
            enumerate_sorted(g, &[pred], &cost, &[])
        }
    }
    .map_err(|e| Fail::new(2, format!("oracle check unavailable: {e}")))?;
    let want: Vec<i64> = all.iter().take(k).filter_map(|(v, _)| v.finite()).collect();
    let mut diffs = Vec::new();
    if want != values {
        diffs.push(format!("values {values:?}, oracle {want:?}"));
    }
    if let Some(sols) = sols {
        for (i, s) in sols.iter().enumerate() {
            if !pred.feasible(g, &s.sets()[0]) {
                diffs.push(format!("solution {} is infeasible", i + 1));
            }
            if sols[..i].contains(s) {
                diffs.push(format!("solution {} repeats an earlier one", i + 1));
            }
        }
    }
    if diffs.is_empty() {
        eprintln!("oracle check: ok ({} values)", values.len());
        Ok(())
    } else {
        Err(Fail::new(3, format!("oracle check failed: {}", diffs.join("; "))))
    }
}

fn print_stats(p: &PrepStats, s: &KBestStats, emitted: usize) {
    let mut e = io::stderr().lock();
    let _ = writeln!(
        e,
        "width={} input_width={} td_depth={} bags={}",
        p.width, p.input_width, p.td_depth, p.bags
    );
    let _ = writeln!(
        e,
        "parse_nodes={} parse_depth={} max_order={}",
        p.parse_nodes, p.parse_depth, p.max_order
    );
    let _ = writeln!(
        e,
        "states reachable={} relevant={} max_per_node={} distinct={} fitting_pairs={}",
        p.reachable_states, p.relevant_states, p.max_states, p.distinct_states, p.fitting_pairs
    );
    let _ = writeln!(e, "expansions={}", s.expansions);
    if !s.copies.is_empty() {
        let min = s.copies.iter().min().unwrap();
        let max = s.copies.iter().max().unwrap();
        let mean = s.copies.iter().sum::<usize>() as f64 / s.copies.len() as f64;
        let _ = writeln!(
            e,
            "copies min={min} mean={mean:.2} max={max} bound={}",
            p.parse_depth + 1
        );
    }
    for (i, pair) in s.copies.chunks(2).enumerate() {
        let copies: Vec<String> = pair.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            e,
            "expansion {} path={} copies={}",
            i + 1,
            s.path_lengths[2 * i],
            copies.join("+")
        );
    }
    let _ = writeln!(
        e,
        "time decompose={:?} parse={:?} compile={:?} evaluate={:?} enumerate={:?}",
        p.decompose, p.parse, p.compile, p.evaluate, s.enumerate
    );
    if s.infeasible {
        let _ = writeln!(e, "infeasible");
    } else if s.exhausted {
        let _ = writeln!(e, "exhausted after {emitted}");
    }
}

fn cmd_balance(graph: &Path, td: &Path, output: Option<&Path>) -> Result<(), Fail> {
    let g = read_graph(graph)?;
    let td = read_td(td)?;
    check(&td, &g)?;
    let sd = balance(&td, &g)?;
    let summary = format!("width={} depth={}", sd.width, sd.depth);
    match output {
        Some(path) => {
            fs::write(path, save_td(&sd.td)).map_err(|e| Fail::new(1, format!("{}: {e}", path.display())))?;
            println!("{summary}");
        }
        None => {
            print!("{}", save_td(&sd.td));
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// Prints the violations and fails with exit code 4 if there are any.
fn check(td: &TreeDecomposition, g: &WeightedGraph) -> Result<usize, Fail> {
    let report = validate(td, g);
    if report.is_valid() {
        return Ok(report.width);
    }
    for v in &report.violations {
        println!("{v}");
    }
    Err(Fail::new(4, ""))
}

fn cmd_validate(graph: &Path, td: &Path) -> Result<(), Fail> {
    let g = read_graph(graph)?;
    let td = read_td(td)?;
    let w = check(&td, &g)?;
    println!("valid width={w}");
    Ok(())
}
