//! Command-line front end for the engine.
//!
//! One subcommand per module surface: `kdv` renders loop-equation free
//! energies, `intersect` queries the psi-class oracle, `trees` lists the
//! stable rooted trees with their operator coefficients, `correlator`
//! evaluates genus-0 correlators on a model, and `verify` runs the
//! identity suites. Exit code 0 means success, 1 means an identity check
//! failed, 2 means bad input.

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use dzloop::frobenius::{FrobeniusModel, ModelCtx, A2_MODEL_SRC, A3_MODEL_SRC, POINT_MODEL_SRC};
use dzloop::intersect::{IntersectionTable, TauSpec};
use dzloop::kdv::KdVTable;
use dzloop::operators::assignment_coefficient;
use dzloop::rational::{rat_int, Rational};
use dzloop::trees::{enumerate_q, enumerate_trees, Half, RootedTree};

mod verify;

/// Directory for the persistent intersection-number cache. When set, the
/// `intersect` command reads `intersections.txt` from it before computing
/// and rewrites the file with everything memoized afterwards.
pub const CACHE_DIR_VAR: &str = "DZLOOP_INTERSECT_CACHE";

#[derive(Parser)]
#[command(name = "dzloop", about = "Exact free energies, tree operators, and identity checks")]
struct Cli {
    /// Run single-threaded even in a parallel build.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Latex,
}

#[derive(Subcommand)]
enum Command {
    /// Print the genus-g free energy and its coefficient table.
    Kdv {
        #[arg(long)]
        genus: u32,
        /// Highest genus the solver is allowed to attempt.
        #[arg(long, default_value_t = 4)]
        max_genus: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// One psi-class intersection number on the moduli of curves.
    Intersect {
        #[arg(long)]
        genus: u32,
        /// Comma-separated psi exponents, one per marked point.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Stable rooted trees with n legs and their operator coefficients.
    Trees {
        #[arg(long)]
        n: usize,
        /// Total insertion level; the q-assignments distribute it.
        #[arg(long)]
        chi: u32,
        /// Per-leg levels, comma separated; defaults to the even split.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// A genus-0 correlator on a Frobenius model, as a jet polynomial.
    Correlator {
        /// Model file path, or a bundled name: point, a2, a3.
        #[arg(long)]
        model: String,
        /// Insertions "a,p;a,p;..." with 1-based coordinate index a.
        #[arg(long)]
        insertions: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run identity suites; exit 1 if any check fails.
    Verify(verify::VerifyArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.sequential {
        dzloop::par::force_sequential(true);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Kdv { genus, max_genus, format } => cmd_kdv(genus, max_genus, format),
        Command::Intersect { genus, ks, format } => cmd_intersect(genus, &ks, format),
        Command::Trees { n, chi, levels, format } => cmd_trees(n, chi, levels, format),
        Command::Correlator { model, insertions, format } => {
            cmd_correlator(&model, &insertions, format)
        }
        Command::Verify(args) => verify::run(&args),
    }
}

/// Resolves `--model`: an existing file wins, otherwise the bundled
/// models answer to their names (with or without the `.frob` suffix).
pub fn load_model(arg: &str) -> Result<FrobeniusModel, String> {
    let path = Path::new(arg);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {arg}: {e}"))?
    } else {
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .map(|s| s.trim_end_matches(".frob"))
            .unwrap_or("");
        match name {
            "point" => POINT_MODEL_SRC.to_string(),
            "a2" => A2_MODEL_SRC.to_string(),
            "a3" => A3_MODEL_SRC.to_string(),
            _ => return Err(format!("model file not found: {arg}")),
        }
    };
    FrobeniusModel::parse(&text).map_err(|e| format!("invalid model {arg}: {e}"))
}

/// `p/q` or a bare integer, set as LaTeX with the sign outside the bar.
pub fn rational_latex(c: &Rational) -> String {
    let s = c.to_string();
    match s.split_once('/') {
        Some((n, d)) => match n.strip_prefix('-') {
            Some(n) => format!("-\\frac{{{n}}}{{{d}}}"),
            None => format!("\\frac{{{n}}}{{{d}}}"),
        },
        None => s,
    }
}

fn cmd_kdv(genus: u32, max_genus: u32, format: Format) -> Result<ExitCode, String> {
    if genus < 1 || genus > max_genus {
        return Err(format!("genus must lie in 1..={max_genus}, got {genus}"));
    }
    let table = KdVTable::up_to(genus).map_err(|e| e.to_string())?;
    let f = table.get(genus);
    match format {
        Format::Text => {
            if genus == 1 {
                println!("1/24 * log(v[1,1])");
            } else {
                println!("{}", f.realize());
            }
            for (mu, c) in f.iter() {
                println!("({}) {c}", join(mu.parts()));
            }
        }
        Format::Json => {
            let terms: Vec<_> = f
                .iter()
                .map(|(mu, c)| json!({"partition": mu.parts(), "coefficient": c.to_string()}))
                .collect();
            println!("{}", json!({"genus": genus, "terms": terms}));
        }
        Format::Latex => {
            if genus == 1 {
                println!("\\frac{{1}}{{24}} \\log v^{{1,1}}");
            } else {
                println!("{}", f.realize().latex());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_intersect(genus: u32, ks: &[u32], format: Format) -> Result<ExitCode, String> {
    let mut table = IntersectionTable::new();
    let cache = std::env::var(CACHE_DIR_VAR).ok().map(|dir| Path::new(&dir).join("intersections.txt"));
    if let Some(path) = &cache {
        if path.exists() {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("cannot read cache: {e}"))?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let fields: Vec<&str> = line.split_whitespace().collect();
                let parse = || -> Option<(TauSpec, Rational)> {
                    let (&first, rest) = fields.split_first()?;
                    let (&last, mids) = rest.split_last()?;
                    let g = first.parse().ok()?;
                    let ks: Vec<u32> = mids.iter().map(|k| k.parse().ok()).collect::<Option<_>>()?;
                    Some((TauSpec::new(g, ks), last.parse().ok()?))
                };
                let (spec, value) =
                    parse().ok_or_else(|| format!("malformed cache line: {line}"))?;
                table.preload(spec, value);
            }
        }
    }
    let value = table.value(genus, ks).map_err(|e| e.to_string())?;
    if let Some(path) = &cache {
        let mut lines: Vec<String> = table
            .entries()
            .map(|(spec, v)| {
                let mut fields = vec![spec.genus.to_string()];
                fields.extend(spec.ks().iter().map(|k| k.to_string()));
                fields.push(v.to_string());
                fields.join(" ") + "\n"
            })
            .collect();
        lines.sort();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| format!("cannot create cache dir: {e}"))?;
        }
        std::fs::write(path, lines.concat()).map_err(|e| format!("cannot write cache: {e}"))?;
    }
    match format {
        Format::Text => println!("{value}"),
        Format::Json => {
            println!("{}", json!({"genus": genus, "ks": ks, "value": value.to_string()}))
        }
        Format::Latex => println!("{}", rational_latex(&value)),
    }
    Ok(ExitCode::SUCCESS)
}

fn half_name(h: &Half) -> String {
    match h {
        Half::Leg(i) => format!("s{}", i + 1),
        Half::Edge(c) => format!("e{c}"),
    }
}

fn tree_assignments(tree: &RootedTree, chi: u32, levels: &[u32]) -> Vec<(Vec<u32>, Rational)> {
    enumerate_q(tree, chi)
        .into_iter()
        .filter_map(|q| {
            let c = assignment_coefficient(tree, &q, levels);
            if c == rat_int(0) { None } else { Some((q, c)) }
        })
        .collect()
}

fn cmd_trees(
    n: usize,
    chi: u32,
    levels: Option<Vec<u32>>,
    format: Format,
) -> Result<ExitCode, String> {
    if !(1..=8).contains(&n) {
        return Err(format!("leg count must lie in 1..=8, got {n}"));
    }
    let levels = match levels {
        Some(ls) => {
            if ls.len() != n || ls.iter().sum::<u32>() != chi {
                return Err(format!(
                    "levels must be {n} values summing to {chi}, got ({})",
                    join(&ls)
                ));
            }
            ls
        }
        None => {
            if chi % n as u32 != 0 {
                return Err(format!(
                    "chi {chi} does not split evenly over {n} legs; pass --levels"
                ));
            }
            vec![chi / n as u32; n]
        }
    };
    let trees = enumerate_trees(n);
    match format {
        Format::Text => {
            for (i, tree) in trees.iter().enumerate() {
                println!("tree {}: {tree}", i + 1);
                for (q, c) in tree_assignments(tree, chi, &levels) {
                    let parts: Vec<String> = tree
                        .plus_halves()
                        .iter()
                        .zip(&q)
                        .map(|(h, qi)| format!("{}={qi}", half_name(h)))
                        .collect();
                    println!("  [{}] {c}", parts.join(" "));
                }
            }
        }
        Format::Json => {
            let rendered: Vec<_> = trees
                .iter()
                .map(|tree| {
                    let edges: Vec<_> =
                        (1..tree.vertex_count()).map(|v| json!([v, tree.parent(v)])).collect();
                    let legs: Vec<_> =
                        (0..n).map(|s| tree.half_vertex(s)).collect();
                    let halves: Vec<_> = tree.plus_halves().iter().map(half_name).collect();
                    let assignments: Vec<_> = tree_assignments(tree, chi, &levels)
                        .into_iter()
                        .map(|(q, c)| json!({"q": q, "coefficient": c.to_string()}))
                        .collect();
                    json!({
                        "edges": edges,
                        "legs": legs,
                        "halves": halves,
                        "assignments": assignments,
                    })
                })
                .collect();
            println!(
                "{}",
                json!({"n": n, "chi": chi, "levels": levels, "trees": rendered})
            );
        }
        Format::Latex => return Err("latex output is not defined for trees".to_string()),
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_insertions(text: &str, dim: usize) -> Result<Vec<(u8, u32)>, String> {
    let mut out = Vec::new();
    for part in text.split(';') {
        let (a, p) = part
            .split_once(',')
            .ok_or_else(|| format!("insertion must be \"a,p\", got \"{part}\""))?;
        let a: u8 = a.trim().parse().map_err(|_| format!("bad coordinate index \"{a}\""))?;
        let p: u32 = p.trim().parse().map_err(|_| format!("bad descendant level \"{p}\""))?;
        if a == 0 || a as usize > dim {
            return Err(format!("coordinate index {a} outside 1..={dim}"));
        }
        out.push((a, p));
    }
    if out.is_empty() {
        return Err("at least one insertion is required".to_string());
    }
    Ok(out)
}

fn cmd_correlator(model_arg: &str, insertions: &str, format: Format) -> Result<ExitCode, String> {
    let model = load_model(model_arg)?;
    let dim = model.dimension();
    let ins = parse_insertions(insertions, dim)?;
    let ctx = ModelCtx::new(model);
    let value = ctx.correlator(&ins);
    match format {
        Format::Text => println!("{value}"),
        Format::Json => {
            let ins: Vec<_> = ins.iter().map(|&(a, p)| json!([a, p])).collect();
            println!(
                "{}",
                json!({"model": model_arg, "insertions": ins, "correlator": value.to_string()})
            );
        }
        Format::Latex => println!("{}", value.latex()),
    }
    Ok(ExitCode::SUCCESS)
}

fn join(xs: &[u32]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}
