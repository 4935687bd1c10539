//! The `verify` subcommand. Builds a deterministic list of identity
//! jobs from the selected suites, runs them (in parallel in a parallel
//! build), and prints one buffered report per job in list order.

use std::process::ExitCode;

use clap::Args;
use serde_json::json;

use dzloop::diffpoly::jet;
use dzloop::identities::{
    check_a21, check_aop_single, check_genus1, check_universal, has_kdv_free_energies,
    IdentityReport,
};
use dzloop::intersect::intersection_number;
use dzloop::kdv::{enumerate_partitions, KdVTable, Partition};
use dzloop::operators::OpCtx;
use dzloop::par;

use crate::{load_model, Format};

#[derive(Args)]
pub struct VerifyArgs {
    /// Run every suite (also the default when none is selected).
    #[arg(long)]
    all: bool,
    /// Free-energy structure and the intersection-number cross-check.
    #[arg(long)]
    structural: bool,
    /// Tree-operator identities on the free energies.
    #[arg(long)]
    universal: bool,
    /// The genus-1 identity for the base refined operators.
    #[arg(long)]
    genus1: bool,
    /// Single and paired refined-operator identities above genus 1.
    #[arg(long)]
    refined: bool,
    /// Model file path or bundled name; default is the point model.
    #[arg(long, default_value = "point")]
    model: String,
    #[arg(long, default_value_t = 3)]
    max_genus: u32,
    /// Highest descendant level in the genus-1 sweep.
    #[arg(long, default_value_t = 3)]
    max_level: u32,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

/// One verification unit. Jobs are independent, so the runner may spread
/// them over threads; reports come back in the order built here.
enum Job {
    Structural { g: u32 },
    Universal { g: u32, mu: Vec<u32>, alphas: Vec<u8> },
    Genus1 { alpha: u8, p: u32 },
    Single { g: u32, alpha: u8, p: u32 },
    Pair { p1: u32, p2: u32 },
}

pub fn run(args: &VerifyArgs) -> Result<ExitCode, String> {
    if args.format == Format::Latex {
        return Err("latex output is not defined for verify".to_string());
    }
    if !(1..=4).contains(&args.max_genus) {
        return Err(format!("max-genus must lie in 1..=4, got {}", args.max_genus));
    }
    let model = load_model(&args.model)?;
    let dim = model.dimension() as u8;
    let kdvish = has_kdv_free_energies(&model);
    let run_all = args.all || !(args.structural || args.universal || args.genus1 || args.refined);

    let mut jobs = Vec::new();
    if run_all || args.structural {
        for g in 1..=args.max_genus {
            jobs.push(Job::Structural { g });
        }
    }
    if run_all || args.universal {
        for alpha in 1..=dim {
            jobs.push(Job::Universal { g: 1, mu: vec![1], alphas: vec![alpha] });
        }
        if kdvish {
            // Genus 4 would need nine-leg trees; the sweep stops at 3.
            for g in 2..=args.max_genus.min(3) {
                for n in 1..=(3 * g - 3) {
                    for mu in enumerate_partitions(g, n) {
                        let alphas = vec![1; mu.len()];
                        jobs.push(Job::Universal { g, mu: mu.parts().to_vec(), alphas });
                    }
                }
            }
        }
    }
    if run_all || args.genus1 {
        for alpha in 1..=dim {
            for p in 1..=args.max_level {
                jobs.push(Job::Genus1 { alpha, p });
            }
        }
    }
    if (run_all || args.refined) && kdvish && args.max_genus >= 2 {
        for p in 4..=6 {
            jobs.push(Job::Single { g: 2, alpha: 1, p });
        }
        if args.max_genus >= 3 {
            jobs.push(Job::Single { g: 3, alpha: 1, p: 7 });
        }
        jobs.push(Job::Pair { p1: 2, p2: 3 });
        jobs.push(Job::Pair { p1: 3, p2: 4 });
    }

    let kdv = KdVTable::up_to(args.max_genus).map_err(|e| e.to_string())?;
    let octx = OpCtx::new(model);
    let reports = par::map_collect(&jobs, |job| run_job(job, &octx, &kdv));
    let passed = reports.iter().filter(|r| r.equal).count();

    match args.format {
        Format::Text => {
            for r in &reports {
                if r.equal {
                    println!("ok   {} {}", r.name, r.params);
                } else {
                    let w = r.witness.as_deref().unwrap_or("sides differ");
                    println!("FAIL {} {}  witness {w}", r.name, r.params);
                }
            }
            println!("{} checks, {} passed", reports.len(), passed);
        }
        Format::Json => {
            let arr: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "name": r.name,
                        "params": r.params,
                        "equal": r.equal,
                        "witness": r.witness,
                    })
                })
                .collect();
            println!("{}", serde_json::Value::Array(arr));
        }
        Format::Latex => unreachable!("rejected above"),
    }
    if passed == reports.len() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn run_job(job: &Job, octx: &OpCtx, kdv: &KdVTable) -> IdentityReport {
    let result = match job {
        Job::Structural { g } => return structural_report(kdv, *g),
        Job::Universal { g, mu, alphas } => check_universal(octx, kdv, *g, mu, alphas),
        Job::Genus1 { alpha, p } => check_genus1(octx, *alpha, *p),
        Job::Single { g, alpha, p } => check_aop_single(octx, kdv, *g, *alpha, *p),
        Job::Pair { p1, p2 } => check_a21(octx, kdv, *p1, *p2),
    };
    // Job selection never builds an inapplicable check; if one slips
    // through, surface it as a failure instead of tearing down the run.
    result.unwrap_or_else(|e| IdentityReport {
        name: "error".to_string(),
        params: String::new(),
        lhs: String::new(),
        rhs: String::new(),
        equal: false,
        witness: Some(e.to_string()),
    })
}

/// Structure of the genus-g table itself: partition domain, the
/// intersection-number cross-check on the top coefficient, derivative
/// degree, and independence from the undifferentiated coordinate.
fn structural_report(kdv: &KdVTable, g: u32) -> IdentityReport {
    let f = kdv.get(g);
    let mut problems: Vec<String> = Vec::new();
    for (mu, _) in f.iter() {
        if g == 1 {
            if !mu.is_genus1_marker() {
                problems.push(format!("genus 1 carries a stray partition ({:?})", mu.parts()));
            }
        } else {
            let ok = mu.parts().iter().all(|&k| k >= 2)
                && mu.sum() == 3 * g - 3 + mu.len() as u32
                && mu.len() as u32 <= 3 * g - 3;
            if !ok {
                problems.push(format!("partition {:?} outside the genus-{g} domain", mu.parts()));
            }
        }
    }
    let top = if g == 1 { Partition::genus1() } else { Partition::new([3 * g - 2]) };
    let c_top = f.coefficient(&top);
    let oracle = intersection_number(g, &[3 * g - 2]).expect("one-point input is stable");
    if c_top != oracle {
        problems.push(format!("top coefficient {c_top} differs from the oracle {oracle}"));
    }
    if g >= 2 {
        let p = f.realize();
        if p.dx_degrees() != [2 * g as i64 - 2].into() {
            problems.push(format!("derivative degree is not {}", 2 * g - 2));
        }
        if !p.partial(jet(1, 0)).is_zero() {
            problems.push("free energy depends on the undifferentiated coordinate".to_string());
        }
    }
    IdentityReport {
        name: "structural".to_string(),
        params: format!("g={g}"),
        lhs: c_top.to_string(),
        rhs: oracle.to_string(),
        equal: problems.is_empty(),
        witness: problems.into_iter().next(),
    }
}
