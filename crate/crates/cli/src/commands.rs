use std::fmt;

use carnot::algebra::{heisenberg, GroupPoint, StructureConstants};
use carnot::deformation::{
    convergence_report, gk_family, gk_member, semicontinuity_experiment, unit_box_pairs, FamilyIndex,
};
use carnot::error::CarnotError;
use carnot::filtration::{n0_search, w_decomposition};
use carnot::format::{parse_spec, write_spec, SpecFile};
use carnot::geodesics::{distance, exp_map, Covector, DistanceMethod, DistanceOptions};
use carnot::jmaps::{j_operator, metivier_check, MetivierStatus};
use carnot::mcp::{nce_lower_bound, CovectorSampler, NceOptions};
use nalgebra::DVector;

use crate::args::{Cli, Command, FamilyCommand, Format, Method};
use crate::report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CarnotError> for Failure {
    fn from(e: CarnotError) -> Self {
        let code = match e {
            CarnotError::Antisymmetry { .. } | CarnotError::NotStepTwo { .. } | CarnotError::Parse { .. } => {
                EXIT_INVALID
            }
            CarnotError::Inconclusive { .. } | CarnotError::Numerical(_) => EXIT_INCONCLUSIVE,
            CarnotError::Dimension { .. } | CarnotError::Domain(_) => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Finished report and the exit code it carries.
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

struct Source {
    name: String,
    text: String,
    file: SpecFile,
}

fn load_source(spec: &str) -> Result<Source, Failure> {
    let builtin = |sc: StructureConstants| {
        let text = write_spec(&sc);
        let file = parse_spec(&text).expect("builtin round trip");
        Ok(Source {
            name: spec.to_string(),
            text,
            file,
        })
    };
    if spec == "heisenberg" {
        return builtin(heisenberg());
    }
    if let Some(k) = spec.strip_prefix("gk:") {
        let k: FamilyIndex = k.parse().map_err(|e: CarnotError| Failure::usage(e.to_string()))?;
        return builtin(gk_member(k));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::usage(format!("cannot read spec `{spec}`: {e}")))?;
    let file = parse_spec(&text)?;
    Ok(Source {
        name: spec.to_string(),
        text,
        file,
    })
}

fn parse_vector(what: &str, s: &str, len: usize) -> Result<Vec<f64>, Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("{what}: expected comma-separated numbers, got `{s}`")))?;
    if v.len() != len {
        return Err(Failure::usage(format!("{what}: expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Failure::usage(format!("{what}: entries must be finite")));
    }
    Ok(v)
}

fn parse_point(what: &str, s: &str, sc: &StructureConstants) -> Result<GroupPoint, Failure> {
    let v = parse_vector(what, s, sc.m() + sc.d2())?;
    Ok(GroupPoint::from_flat(sc.m(), sc.d2(), &v)?)
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let g = &cli.global;
    if let Command::Family { which } = &cli.command {
        return family(cli, which);
    }
    let source = load_source(&g.spec)?;
    let command = command_name(&cli.command);
    let mut r = Report::new(g.format, command, &source.name, &source.text, g.seed, g.budget);

    let validation = source.file.validate()?;
    if let Command::Validate = cli.command {
        r.field("m", validation.m);
        r.field("d2", validation.d2);
        r.field("antisymmetric", validation.antisymmetric);
        if let Some((i, j, l)) = validation.antisymmetry_violation {
            r.field("antisymmetry_violation", format!("c {i} {j} {l}"));
        }
        r.field("bracket_rank", validation.rank.rank);
        r.field("bracket_generating", validation.bracket_generating);
        r.field("valid", validation.is_valid());
        let code = if validation.is_valid() { EXIT_OK } else { EXIT_INVALID };
        return Ok(Outcome { text: r.finish(), code });
    }
    let sc = source.file.into_constants()?;

    match &cli.command {
        Command::Validate | Command::Family { .. } => unreachable!("handled above"),
        Command::Info => {
            let (n, q) = sc.dims();
            let verdict = metivier_check(&sc, g.budget, g.seed)?;
            r.field("m", sc.m());
            r.field("d2", sc.d2());
            r.field("n", n);
            r.field("Q", q);
            r.field("metivier", verdict.status);
            r.field("min_sigma", r.num(verdict.min_sigma));
            if let Some(w) = &verdict.witness {
                r.field("witness", r.vec(w.iter().copied()));
            }
            r.field("certificate", &verdict.certificate);
            let code = if verdict.status == MetivierStatus::Inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_OK
            };
            Ok(Outcome { text: r.finish(), code })
        }
        Command::N0 => {
            let (n, q) = sc.dims();
            let res = n0_search(&sc, g.budget, g.seed)?;
            let verdict = if sc.m() % 2 == 0 {
                Some(metivier_check(&sc, g.budget, g.seed)?.status)
            } else {
                None
            };
            let exact = verdict == Some(MetivierStatus::Metivier) && res.best_value == (2 * q - n) as u64;
            r.field("n0", res.best_value);
            r.field("bound", if exact { "exact (Metivier group, 2Q - n)" } else { "lower bound" });
            r.field("argmax", r.vec(res.argmax.to_flat()));
            r.field("argmax_kind", res.argmax_kind);
            r.field("argmax_index", res.argmax_index);
            let report = w_decomposition(&sc, &res.argmax)?;
            r.field("argmax_dims_w", format!("{:?}", report.dims_w));
            r.field("argmax_dim_w_inf", report.dim_w_inf);
            r.field("samples_evaluated", res.samples_evaluated);
            r.field(
                "candidates",
                format!(
                    "basis {} + sparse {} + random {}",
                    res.basis_candidates, res.sparse_candidates, res.random_candidates
                ),
            );
            r.field("infinite_count", res.infinite_count);
            Ok(Outcome { text: r.finish(), code: EXIT_OK })
        }
        Command::Jmap { u } => {
            let u = DVector::from_vec(parse_vector("--u", u, sc.d2())?);
            let j = j_operator(&sc, &u)?;
            r.field("u", r.vec(u.iter().copied()));
            r.field("sigma_min", r.num(j.sigma_min()));
            match r.format() {
                Format::Text => r.line("matrix:"),
                Format::Csv => {}
            }
            for row in j.mat.row_iter() {
                r.line(r.vec(row.iter().copied()));
            }
            Ok(Outcome { text: r.finish(), code: EXIT_OK })
        }
        Command::Dist { p, q, method } => {
            let p = parse_point("--p", p, &sc)?;
            let q = parse_point("--q", q, &sc)?;
            let method = match method {
                Method::Shooting => DistanceMethod::Shooting,
                Method::Control => DistanceMethod::Control,
                Method::Both => DistanceMethod::Both,
            };
            let opts = DistanceOptions::default().with_seed(g.seed);
            let est = distance(&sc, &p, &q, method, &opts)?;
            r.field("method", est.method);
            r.field("distance", r.num(est.value()));
            if let Some(s) = &est.shooting {
                r.field("shooting", r.num(s.length));
                r.field("shooting_residual", r.num(s.residual));
                r.field("shooting_starts", s.starts_used);
                r.field("shooting_converged", s.converged_starts);
                r.field("shooting_covector", r.vec(s.covector.to_flat()));
            }
            if let Some((reason, best)) = &est.shooting_failure {
                r.field("shooting_failure", reason);
                r.field("shooting_best_residual", r.num(*best));
            }
            if let Some(c) = &est.control {
                r.field("control", r.num(c.length));
                r.field("control_residual", r.num(c.residual));
                r.field("control_steps", c.steps);
                r.field("control_starts", opts.control.starts);
            }
            if let Some(gap) = est.relative_gap() {
                r.field("relative_gap", r.num(gap));
            }
            Ok(Outcome { text: r.finish(), code: EXIT_OK })
        }
        Command::Exp { lambda, t } => {
            let v = parse_vector("--lambda", lambda, sc.m() + sc.d2())?;
            let cov = Covector::from_flat(sc.m(), sc.d2(), &v)?;
            let p = exp_map(&sc, &cov, *t)?;
            r.field("t", r.num(*t));
            r.field("point", r.vec(p.to_flat()));
            r.field("length", r.num(t * cov.speed()));
            Ok(Outcome { text: r.finish(), code: EXIT_OK })
        }
        Command::Mcp {
            samples,
            s_grid,
            horizontal,
        } => {
            let grid: Vec<f64> = s_grid
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::usage(format!("--s-grid: expected comma-separated numbers, got `{s_grid}`")))?;
            let opts = NceOptions {
                sampler: if *horizontal {
                    CovectorSampler::Horizontal
                } else {
                    CovectorSampler::Normal
                },
                ..NceOptions::default()
            };
            let rep = nce_lower_bound(&sc, *samples, &grid, g.seed, &opts)?;
            if r.format() == Format::Csv {
                let names: Vec<String> = (0..sc.m())
                    .map(|i| format!("xi{}", i + 1))
                    .chain((0..sc.d2()).map(|l| format!("u{}", l + 1)))
                    .collect();
                r.line(format!("{},s,exponent,minimizing", names.join(",")));
                for row in &rep.rows {
                    let e = row.exponent.map_or("nan".to_string(), |e| r.num(e));
                    r.line(format!("{},{},{e},{}", r.vec(row.covector.to_flat()), r.num(row.s), row.minimizing));
                }
            }
            r.field("nce_lower_bound", r.num(rep.value));
            if let Some((cov, s)) = &rep.witness {
                r.field("witness_covector", r.vec(cov.to_flat()));
                r.field("witness_s", r.num(*s));
            }
            r.field("samples", rep.samples);
            r.field("minimizing", rep.minimizing);
            r.field("excluded", rep.excluded);
            r.field("exclusion_rate", r.num(rep.exclusion_rate()));
            r.field("discarded_evaluations", rep.discarded);
            r.field("s_grid", r.vec(rep.s_grid.iter().copied()));
            Ok(Outcome { text: r.finish(), code: EXIT_OK })
        }
    }
}

fn family(cli: &Cli, which: &FamilyCommand) -> Result<Outcome, Failure> {
    let g = &cli.global;
    let fam = gk_family();
    let source = write_spec(&gk_member(FamilyIndex::Finite(1)));
    match which {
        FamilyCommand::Converge { pairs, k_list } => {
            let ks = k_list
                .split(',')
                .map(|t| t.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Failure::usage(format!("--k-list: expected comma-separated integers, got `{k_list}`")))?;
            let mut r = Report::new(g.format, "family converge", &fam.name, &source, g.seed, g.budget);
            let sample = unit_box_pairs(4, 3, *pairs, g.seed);
            let opts = DistanceOptions::default().with_seed(g.seed);
            let rep = convergence_report(&fam, &sample, &ks, &opts)?;
            r.field("pairs", format!("{} seeded pairs, coordinates uniform in [0, 1] (sample, not a sup over the box)", pairs));
            let fmt = r.format();
            let cell = |x: Option<f64>| x.map_or("failed".to_string(), |v| crate::report::num(fmt, v));
            r.line("k,pair_id,d_k,d_inf,gap");
            for row in &rep.rows {
                r.line(format!(
                    "{},{},{},{},{}",
                    row.k,
                    row.pair_id,
                    cell(row.d_k),
                    cell(row.d_inf),
                    cell(row.gap)
                ));
            }
            for (k, gap) in &rep.max_gap {
                r.field(&format!("max_gap_k{k}"), cell(*gap));
            }
            r.field("non_increasing_within_1e-2", rep.monotone_within(1e-2));
            let code = if rep.failed_cells() > 0 { EXIT_INCONCLUSIVE } else { EXIT_OK };
            Ok(Outcome { text: r.finish(), code })
        }
        FamilyCommand::Semicontinuity => {
            let mut r = Report::new(g.format, "family semicontinuity", &fam.name, &source, g.seed, g.budget);
            let rep = semicontinuity_experiment(&fam, g.budget, g.seed)?;
            for line in rep.rendered.lines() {
                r.line(line);
            }
            let code = if rep.pattern_holds() { EXIT_OK } else { EXIT_INVALID };
            Ok(Outcome { text: r.finish(), code })
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Info => "info",
        Command::N0 => "n0",
        Command::Jmap { .. } => "jmap",
        Command::Dist { .. } => "dist",
        Command::Exp { .. } => "exp",
        Command::Mcp { .. } => "mcp",
        Command::Family { .. } => "family",
    }
}
