use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use binsis::oracle::{enumerate_omega, exact_count_dp, tv_distance};
use binsis::parallel::{log_weights, map_indices, with_threads};
use binsis::weights::{
    adversarial_block, adversarial_greedy, delta_max_experiment, log_delta_star, summarize,
};
use binsis::{gale_ryser_feasible, BinaryMatrix, Error, Heuristic, MarginPair, Sampler};

use crate::input::{load_matrix, CliError, CliResult, Problem};
use crate::report::{self, big, fmt_ratio, header, write_header, write_summary};
use crate::{Command, RunArgs, UniformityMode};

/// Draws are generated and written in chunks of this size.
const CHUNK: u64 = 4096;

pub fn run(command: Command, out: &mut impl Write) -> CliResult<ExitCode> {
    match command {
        Command::Feasible(input) => feasible(&Problem::load(&input)?, out),
        Command::Sample { input, run, out: dir } => {
            let p = Problem::load(&input)?;
            sample(&p, &run, dir.as_deref(), out)
        }
        Command::Count { input, run } => {
            let p = Problem::load(&input)?;
            count(&p, &run, out)
        }
        Command::Diagnose { input, run } => {
            let p = Problem::load(&input)?;
            diagnose(&p, &run, out)
        }
        Command::Eval { input, matrix } => eval(&Problem::load(&input)?, &load_matrix(&matrix)?, out),
        Command::CheckUniformity {
            input,
            run,
            mode,
            replicates,
        } => {
            let p = Problem::load(&input)?;
            if p.mask.is_some() {
                return Err(CliError::Usage("uniformity checks do not take structural zeros".into()));
            }
            check_uniformity(&p, &run, mode, replicates, out)
        }
        Command::ExactCount { input, budget } => {
            let p = Problem::load(&input)?;
            let c = exact_count_dp(&p.margins, p.mask(), budget)?;
            writeln!(out, "count={c}")?;
            writeln!(out, "scientific={}", c.scientific(6))?;
            writeln!(out, "log_count={:.16e}", c.ln())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate { input, out: dir } => {
            let p = Problem::load(&input)?;
            let all = enumerate_omega(&p.margins, p.mask())?;
            let path = dir.join("omega.txt");
            create_dir(&dir)?;
            write_file(&path, |w| {
                writeln!(w, "# count={}", all.len())?;
                for (k, z) in all.iter().enumerate() {
                    writeln!(w, "# matrix={k}")?;
                    write!(w, "{z}")?;
                }
                Ok(())
            })?;
            writeln!(out, "count={}", all.len())?;
            writeln!(out, "path={}", path.display())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::TvDistance(input) => {
            let p = Problem::load(&input)?;
            let r = tv_distance(&p.margins, p.heuristic, p.mask())?;
            writeln!(out, "heuristic={}", p.heuristic)?;
            writeln!(out, "size={}", r.size)?;
            writeln!(out, "tv={:.6e}", r.tv)?;
            writeln!(out, "q_min={:.6e}", r.q_min)?;
            writeln!(out, "q_max={:.6e}", r.q_max)?;
            writeln!(out, "uniform={:.6e}", 1.0 / r.size as f64)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_owned(),
        source,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    f(&mut w).and_then(|_| w.flush()).map_err(wrap)
}

fn feasible(p: &Problem, out: &mut impl Write) -> CliResult<ExitCode> {
    let verdict = match p.mask() {
        None if gale_ryser_feasible(&p.margins) => Ok(()),
        None => Err("Gale-Ryser conditions fail".to_string()),
        Some(mask) => match Sampler::new(&p.margins, Some(mask), p.config).and_then(|s| s.check_first_column()) {
            Ok(()) => Ok(()),
            Err(e @ (Error::InfeasibleMargins(_) | Error::DeadEnd { .. } | Error::NoValidPath)) => Err(e.to_string()),
            Err(e) => return Err(e.into()),
        },
    };
    match verdict {
        Ok(()) => {
            writeln!(out, "FEASIBLE")?;
            Ok(ExitCode::SUCCESS)
        }
        Err(reason) => {
            writeln!(out, "INFEASIBLE")?;
            writeln!(out, "reason={reason}")?;
            Ok(ExitCode::from(1))
        }
    }
}

fn sample(p: &Problem, run: &RunArgs, dir: Option<&Path>, out: &mut impl Write) -> CliResult<ExitCode> {
    let sampler = Sampler::new(&p.margins, p.mask(), p.config)?;
    let head = header(p, run.seed, run.draws);
    let emit = |mats: &mut dyn Write, log: &mut dyn Write| -> CliResult<()> {
        let mut start = 0;
        while start < run.draws {
            let len = CHUNK.min(run.draws - start);
            let draws = with_threads(run.jobs, || {
                map_indices(len, |k| sampler.sample_indexed(run.seed, start + k))
            })?;
            for (k, d) in draws.iter().enumerate() {
                let index = start + k as u64;
                writeln!(mats, "# index={index} log_q={:.16e}", d.log_q)?;
                write!(mats, "{}", d.matrix)?;
                writeln!(log, "{index} {:.16e}", d.log_q)?;
            }
            start += len;
        }
        Ok(())
    };
    match dir {
        Some(dir) => {
            create_dir(dir)?;
            let mats_path = dir.join("matrices.txt");
            let log_path = dir.join("weights.log");
            let mut mats = BufWriter::new(File::create(&mats_path)?);
            let mut log = BufWriter::new(File::create(&log_path)?);
            write_header(&mut mats, &head)?;
            write_header(&mut log, &head)?;
            emit(&mut mats, &mut log)?;
            mats.flush()?;
            log.flush()?;
            writeln!(out, "matrices={}", mats_path.display())?;
            writeln!(out, "weights={}", log_path.display())?;
        }
        None => {
            write_header(out, &head)?;
            emit(out, &mut std::io::sink())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn count(p: &Problem, run: &RunArgs, out: &mut impl Write) -> CliResult<ExitCode> {
    let sampler = Sampler::new(&p.margins, p.mask(), p.config)?;
    let s = summarize(&with_threads(run.jobs, || log_weights(&sampler, run.seed, run.draws))?)?;
    write_header(out, &header(p, run.seed, run.draws))?;
    writeln!(out, "# W_bar = {} +- {}", big(s.log_mean), big(s.log_se))?;
    write_summary(out, "", &s)?;
    Ok(ExitCode::SUCCESS)
}

fn diagnose(p: &Problem, run: &RunArgs, out: &mut impl Write) -> CliResult<ExitCode> {
    let mut heuristics: Vec<Heuristic> = Vec::new();
    for h in Heuristic::BASE {
        let h = if p.mask.is_some() { h.with_zeros() } else { h };
        if !heuristics.contains(&h) {
            heuristics.push(h);
        }
    }
    let mut rows = Vec::new();
    for h in heuristics {
        let sampler = Sampler::new(&p.margins, p.mask(), p.config_for(h))?;
        rows.push((h, summarize(&with_threads(run.jobs, || log_weights(&sampler, run.seed, run.draws))?)?));
    }
    let mut head = header(p, run.seed, run.draws);
    head.retain(|(k, _)| k != "heuristic");
    write_header(out, &head)?;
    report::table_header(out)?;
    for (h, s) in &rows {
        report::table_row(out, h.name(), s)?;
    }
    for (h, s) in &rows {
        write_summary(out, h.name(), s)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(p: &Problem, z: &BinaryMatrix, out: &mut impl Write) -> CliResult<ExitCode> {
    if z.nrows() != p.margins.m() || z.ncols() != p.margins.n() {
        return Err(CliError::Usage(format!(
            "matrix is {}x{} but margins are {}x{}",
            z.nrows(),
            z.ncols(),
            p.margins.m(),
            p.margins.n()
        )));
    }
    let sampler = Sampler::new(&p.margins, p.mask(), p.config)?;
    let lq = sampler.eval(z);
    writeln!(out, "heuristic={}", p.heuristic)?;
    if lq == f64::NEG_INFINITY {
        writeln!(out, "OUT-OF-SUPPORT")?;
        writeln!(out, "log_q=-inf")?;
        return Ok(ExitCode::from(1));
    }
    writeln!(out, "log_q={lq:.16e}")?;
    writeln!(out, "weight={}", big(-lq))?;
    Ok(ExitCode::SUCCESS)
}

fn check_uniformity(
    p: &Problem,
    run: &RunArgs,
    mode: UniformityMode,
    replicates: usize,
    out: &mut impl Write,
) -> CliResult<ExitCode> {
    let mut head = header(p, run.seed, run.draws);
    match mode {
        UniformityMode::Rowgen => {
            head.push(("mode".into(), "rowgen".into()));
            head.push(("L".into(), replicates.to_string()));
            let rep = with_threads(run.jobs, || {
                delta_max_experiment(
                    p.margins.rows(),
                    p.margins.n(),
                    replicates,
                    run.draws,
                    p.heuristic,
                    run.seed,
                )
            })?;
            write_header(out, &head)?;
            for (l, r) in rep.replicates.iter().enumerate() {
                writeln!(
                    out,
                    "replicate={l} delta={} log_delta={:.16e} log_w0={:.16e}",
                    fmt_ratio(r.delta, r.log_delta),
                    r.log_delta,
                    r.log_w0
                )?;
            }
            writeln!(out, "delta_max={}", fmt_ratio(rep.delta_max, rep.log_delta_max))?;
            writeln!(out, "log_delta_max={:.16e}", rep.log_delta_max)?;
            Ok(ExitCode::SUCCESS)
        }
        UniformityMode::Block | UniformityMode::Greedy => {
            let (margins, z) = if mode == UniformityMode::Block {
                head.push(("mode".into(), "block".into()));
                let (m, n) = (p.margins.m(), p.margins.n());
                let r1 = p.margins.rows()[0];
                let regular = p.margins.rows().iter().chain(p.margins.cols()).all(|&x| x == r1);
                if m != n || !regular {
                    return Err(CliError::Usage(
                        "block mode needs square margins with every row and column sum equal".into(),
                    ));
                }
                (p.margins.clone(), adversarial_block(m, n, r1)?)
            } else {
                head.push(("mode".into(), "greedy".into()));
                let mut rows = p.margins.rows().to_vec();
                let mut cols = p.margins.cols().to_vec();
                rows.sort_unstable_by(|a, b| b.cmp(a));
                cols.sort_unstable_by(|a, b| b.cmp(a));
                let z = match adversarial_greedy(&rows, &cols) {
                    Ok(z) => z,
                    Err(e @ Error::ConstructionFailed(_)) => {
                        write_header(out, &head)?;
                        writeln!(out, "CONSTRUCTION-FAILED")?;
                        writeln!(out, "reason={e}")?;
                        return Ok(ExitCode::from(1));
                    }
                    Err(e) => return Err(e.into()),
                };
                (MarginPair::new(rows, cols)?, z)
            };
            let sampler = Sampler::new(&margins, None, p.config)?;
            let logs = with_threads(run.jobs, || log_weights(&sampler, run.seed, run.draws))?;
            let s = summarize(&logs)?;
            let star = log_delta_star(sampler.eval(&z), &logs)?;
            write_header(out, &head)?;
            writeln!(out, "log_w_star={:.16e}", -sampler.eval(&z))?;
            writeln!(out, "delta_hat={}", fmt_ratio(s.delta_hat, s.log_delta_hat))?;
            writeln!(out, "log_delta_hat={:.16e}", s.log_delta_hat)?;
            writeln!(out, "delta_star={}", fmt_ratio(star.exp(), star))?;
            writeln!(out, "log_delta_star={star:.16e}")?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
