use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use latticebolt::bench::{
    self, check_equivalence, iteration_time_spectrum, measure_mlups, membench as run_membench, offset_ratio,
    AccessPattern, BenchRecord, MembenchConfig, MembenchResult, MIN_MEASURED_ITERATIONS, NON_REPRODUCIBILITY_STATEMENT,
    PUBLISHED_GPU_VALUES,
};
use latticebolt::io;
use latticebolt::solver::{run_cavity_typed, Profile};
use latticebolt::{CavityResult, Ordering, Precision, Real, SimConfig, SolverError, StrategyKind, StreamStrategy};
use serde_json::json;

use crate::manifest::OutDir;
use crate::settings::{self, parse_strategy, Settings, WORKERS_ENV};
use crate::{BenchArgs, CavityArgs, MembenchArgs, SpectrumArgs};

const CAVITY_KEYS: &[&str] = &[
    "re", "size", "lid_speed", "tau", "ordering", "strategy", "tile_width", "lane_width", "layout", "iters",
    "precision", "tolerance", "store_macros", "poison_check", "workers", "reference", "reference_profile",
];
const BENCH_KEYS: &[&str] = &[
    "sizes", "strategies", "orderings", "workers", "iters", "warmup", "precision", "layout", "tile_width",
    "lane_width", "re", "lid_speed", "store_macros", "check_equivalence",
];
const MEMBENCH_KEYS: &[&str] = &["pattern", "vectors", "vector_bytes", "repeats", "strategy", "allow_cache_resident"];
const SPECTRUM_KEYS: &[&str] = &["input", "mean_seconds"];

const DEFAULT_CAVITY_SIZE: usize = 32;
const DEFAULT_BENCH_ITERS: usize = 100;
const DEFAULT_WARMUP: usize = 5;
const DEFAULT_VECTORS: usize = 19;

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("starting the worker pool")
}

/// Up to 12 significant digits, trailing zeros dropped.
fn num(v: f64) -> String {
    let digits = if v == 0.0 || !v.is_finite() { 1 } else { v.abs().log10().floor() as i32 + 1 };
    let prec = (12 - digits).max(0) as usize;
    let s = format!("{v:.prec$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Cavity configuration from merged settings.
fn sim_config(s: &Settings, size_key: Option<usize>) -> Result<SimConfig> {
    let size = match size_key {
        Some(n) => n,
        None => s.get_or("size", DEFAULT_CAVITY_SIZE)?,
    };
    let mut c = SimConfig::cavity(size)?;
    c.reynolds = s.get_or("re", c.reynolds)?;
    c.lid_speed = s.get("lid_speed")?;
    c.tau = s.get("tau")?;
    c.ordering = s.get_or("ordering", Ordering::default())?;
    if let Some(name) = s.raw("strategy") {
        c.strategy = parse_strategy(name, size, s.get("tile_width")?, s.get("lane_width")?)?;
    }
    c.layout = s.get_or("layout", c.layout)?;
    c.iterations = s.get_or("iters", c.iterations)?;
    c.precision = s.get_or("precision", Precision::default())?;
    c.steady_tolerance = match s.raw("tolerance") {
        None => c.steady_tolerance,
        Some(t) if t.eq_ignore_ascii_case("none") => None,
        Some(t) => Some(t.parse::<f64>().map_err(|_| anyhow!("tolerance = {t:?}: expected a number or none"))?),
    };
    c.store_macros = s.bool("store_macros")?;
    c.poison_check = s.bool("poison_check")?;
    Ok(c)
}

fn run_with_progress<T: Real>(config: &SimConfig) -> Result<CavityResult, SolverError> {
    run_cavity_typed::<T>(config, |step, change| {
        if step % 1000 == 0 {
            eprintln!("step {step}: max velocity change {change:.3e}");
        }
    })
}

pub fn cavity(a: CavityArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref(), CAVITY_KEYS)?;
    // a scaling input given on the command line displaces the other one from the file
    if a.tau.is_some() {
        s.remove("lid_speed");
    }
    if a.lid_speed.is_some() {
        s.remove("tau");
    }
    s.set("re", a.re);
    s.set("size", a.size);
    s.set("lid_speed", a.lid_speed);
    s.set("tau", a.tau);
    s.set("ordering", a.ordering);
    s.set("strategy", a.strategy);
    s.set("tile_width", a.tile_width);
    s.set("lane_width", a.lane_width);
    s.set("layout", a.layout);
    s.set("iters", a.iters);
    s.set("precision", a.precision);
    s.set("tolerance", a.tolerance);
    s.set_flag("store_macros", a.store_macros);
    s.set_flag("poison_check", a.poison_check);
    s.set("reference", a.reference.as_ref().map(|p| p.display().to_string()));
    s.set("reference_profile", a.reference_profile);

    let config = sim_config(&s, None)?;
    let (tau, lid) = config.resolve()?;
    let re = config.effective_reynolds()?;
    let workers = settings::workers(a.workers, s.get("workers")?)?;
    let d = config.dims;
    println!("domain {d}, Re = {}, tau = {}, lid speed = {}", num(re), num(tau), num(lid));
    println!(
        "ordering {}, strategy {}, layout {}, precision {}, {workers} worker(s), at most {} steps",
        config.ordering, config.strategy, config.layout, config.precision, config.iterations
    );
    let fluid = d.nx.saturating_sub(2) * d.ny.saturating_sub(2) * d.nz.saturating_sub(2);
    if fluid == 0 {
        println!("all-boundary domain: every node is a wall node, no fluid nodes");
    }

    let result = pool(workers)?.install(|| match config.precision {
        Precision::Single => run_with_progress::<f32>(&config),
        Precision::Double => run_with_progress::<f64>(&config),
    })?;

    let drift = (result.final_mass - result.initial_mass) / result.initial_mass;
    match config.steady_tolerance {
        Some(tol) if result.converged => {
            println!("steady after {} steps (max change {:.3e} <= {tol:e} x lid speed)", result.iterations, result.last_change)
        }
        Some(_) if result.last_change.is_finite() => println!(
            "not steady after {} steps (last max change {:.3e}); raise --iters",
            result.iterations, result.last_change
        ),
        Some(_) => println!("ran {} steps, too few for a steady-state check", result.iterations),
        None => println!("ran {} steps", result.iterations),
    }
    println!("relative mass drift {drift:.3e}");

    let mut out = OutDir::create(&a.common.out)?;
    io::write_profile(&out.file("ux_along_z.csv")?, &result.ux_along_z)?;
    io::write_profile(&out.file("uz_along_x.csv")?, &result.uz_along_x)?;
    if let Some(states) = &result.final_state {
        let path = out.file("macros.csv")?;
        io::write_table(
            &path,
            &["x", "y", "z", "rho", "ux", "uy", "uz"],
            states.iter().enumerate().map(|(cell, m)| {
                let (x, y, z) = (cell % d.nx, (cell / d.nx) % d.ny, cell / (d.nx * d.ny));
                vec![x as f64, y as f64, z as f64, m.rho, m.u[0], m.u[1], m.u[2]]
            }),
        )?;
    }

    let mut comparison = serde_json::Value::Null;
    if let Some(reference) = s.raw("reference").map(PathBuf::from) {
        let which = s.raw("reference_profile").unwrap_or("ux");
        let profile: &Profile = match which {
            "ux" => &result.ux_along_z,
            "uz" => &result.uz_along_x,
            other => bail!("reference_profile = {other:?}: expected ux or uz"),
        };
        let points = io::read_profile(&reference)?;
        if points.is_empty() {
            bail!("{} holds no reference points", reference.display());
        }
        let dev = profile.max_deviation(&points);
        println!("max |deviation| from {} ({which}): {dev:.4e} over {} points", reference.display(), points.len());
        io::write_table(
            &out.file("reference_comparison.csv")?,
            &["coordinate", "reference", "simulated", "difference"],
            points.iter().map(|&(c, v)| {
                let sim = profile.interpolate(c);
                vec![c, v, sim, sim - v]
            }),
        )?;
        comparison = json!({ "file": reference, "profile": which, "maxDeviation": dev, "points": points.len() });
    }

    let summary = json!({
        "dims": d,
        "tau": tau,
        "lidSpeed": lid,
        "reynolds": re,
        "fluidNodes": fluid,
        "iterations": result.iterations,
        "converged": result.converged,
        "lastChange": result.last_change,
        "relativeMassDrift": drift,
        "uzMirrorCorrelation": result.uz_along_x.mirror_correlation(),
        "reference": comparison,
    });
    let path = out.file("summary.json")?;
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    let manifest = out.finish("cavity", json!({ "sim": config, "workers": workers, "settings": s.as_map() }))?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// Worker sweep: flag list, then the environment, then the file, then all
/// cores.
fn worker_list(flag: Option<String>, s: &Settings) -> Result<Vec<usize>> {
    let list = match flag {
        Some(f) => {
            let mut t = Settings::default();
            t.set("workers", Some(f));
            t.list::<usize>("workers")?
        }
        None => match std::env::var(WORKERS_ENV) {
            Ok(_) => Some(vec![settings::workers(None, None)?]),
            Err(_) => s.list::<usize>("workers")?,
        },
    };
    let list = list.unwrap_or_else(|| vec![std::thread::available_parallelism().map_or(1, |n| n.get())]);
    if list.is_empty() || list.contains(&0) {
        bail!("worker counts must be positive");
    }
    Ok(list)
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref(), BENCH_KEYS)?;
    s.set("sizes", a.sizes);
    s.set("strategies", a.strategies);
    s.set("orderings", a.orderings);
    s.set("iters", a.iters);
    s.set("warmup", a.warmup);
    s.set("precision", a.precision);
    s.set("layout", a.layout);
    s.set("tile_width", a.tile_width);
    s.set("lane_width", a.lane_width);
    s.set("re", a.re);
    s.set("lid_speed", a.lid_speed);
    s.set_flag("store_macros", a.store_macros);
    s.set_flag("check_equivalence", a.check_equivalence);

    let iters: usize = s.get_or("iters", DEFAULT_BENCH_ITERS)?;
    if iters < MIN_MEASURED_ITERATIONS {
        bail!("--iters {iters} is too few: at least {MIN_MEASURED_ITERATIONS} measured iterations are required");
    }
    let warmup: usize = s.get_or("warmup", DEFAULT_WARMUP)?;
    let sizes: Vec<usize> = s.list("sizes")?.unwrap_or_else(|| vec![DEFAULT_CAVITY_SIZE]);
    let names: Vec<String> = s.list("strategies")?.unwrap_or_else(|| vec!["direct".into(), "tile".into(), "lane".into()]);
    let orderings: Vec<Ordering> = s.list("orderings")?.unwrap_or_else(|| vec![Ordering::Pull]);
    let workers = worker_list(a.workers, &s)?;
    if sizes.is_empty() || names.is_empty() || orderings.is_empty() {
        bail!("sizes, strategies and orderings must each name at least one value");
    }

    let mut records: Vec<BenchRecord> = Vec::new();
    for &size in &sizes {
        let mut base = sim_config(&s, Some(size))?;
        base.resolve()?;
        let strategies = names
            .iter()
            .map(|n| parse_strategy(n, size, s.get("tile_width")?, s.get("lane_width")?))
            .collect::<Result<Vec<_>>>()?;
        for &ordering in &orderings {
            base.ordering = ordering;
            if s.bool("check_equivalence")? {
                let mut all = strategies.clone();
                for kind in StrategyKind::ALL {
                    if !all.iter().any(|st| st.kind == kind) {
                        all.push(StreamStrategy::new(kind, size));
                    }
                }
                if let Some(m) = check_equivalence(&base, &all)? {
                    bail!(
                        "equivalence check failed on {} ({ordering}): {} differs from {} at offset {}",
                        base.dims,
                        m.strategy,
                        m.reference,
                        m.offset
                    );
                }
                let list: Vec<String> = all.iter().map(|st| st.to_string()).collect();
                println!("equivalence check {} ({ordering}): {} bit-identical after one step", base.dims, list.join(", "));
            }
            for &strategy in &strategies {
                for &w in &workers {
                    let mut c = base.clone();
                    c.strategy = strategy;
                    eprintln!("measuring {} {ordering} {strategy} with {w} worker(s)", c.dims);
                    let record = pool(w)?.install(|| measure_mlups(&c, warmup, iters))?;
                    if let Some(warning) = &record.warning {
                        eprintln!("warning: {warning}");
                    }
                    records.push(record);
                }
            }
        }
    }

    let mut out = OutDir::create(&a.common.out)?;
    io::write_jsonl(&out.file("bench.jsonl")?, &records)?;
    io::write_bench_csv(&out.file("bench.csv")?, &records)?;
    for r in &records {
        let name = format!("series/{}_{}_{}_w{}.csv", r.domain.nx, r.ordering, r.strategy, r.workers);
        io::write_series(&out.file(&name)?, &r.per_iteration_seconds)?;
    }
    print_table(&records, &sizes, &orderings);
    println!();
    println!("{NON_REPRODUCIBILITY_STATEMENT}");
    let manifest = out.finish(
        "bench",
        json!({ "iterations": iters, "warmup": warmup, "sizes": sizes, "strategies": names,
                "orderings": orderings, "workers": workers, "settings": s.as_map() }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// Rows are strategy and worker count, columns domain sizes; each cell is
/// the mean MLUPS with the standard deviation under it.
fn print_table(records: &[BenchRecord], sizes: &[usize], orderings: &[Ordering]) {
    const W: usize = 14;
    for &ordering in orderings {
        println!();
        println!("{ordering} ordering, MLUPS mean over sigma");
        print!("{:<18}", "strategy/workers");
        for n in sizes {
            print!("{:>W$}", format!("{n}^3"));
        }
        println!();
        let mut rows: BTreeMap<(String, usize), BTreeMap<usize, &BenchRecord>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.ordering == ordering) {
            rows.entry((r.strategy.to_string(), r.workers)).or_default().insert(r.domain.nx, r);
        }
        for ((strategy, workers), cells) in rows {
            print!("{:<18}", format!("{strategy}/{workers}"));
            for n in sizes {
                print!("{:>W$}", cells.get(n).map_or("-".into(), |r| format!("{:.2}", r.mlups_mean)));
            }
            println!();
            print!("{:<18}", "");
            for n in sizes {
                print!("{:>W$}", cells.get(n).map_or(String::new(), |r| format!("({:.2})", r.mlups_std)));
            }
            println!();
        }
    }
}

fn default_vector_bytes(vectors: usize) -> usize {
    const MIB: usize = 1 << 20;
    match bench::last_level_cache_bytes() {
        // source plus destination over all vectors must reach 4x the cache
        Some(cache) => (4 * cache).div_ceil(2 * vectors).next_multiple_of(4).max(MIB),
        None => 16 * MIB,
    }
}

pub fn membench(a: MembenchArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref(), MEMBENCH_KEYS)?;
    s.set("pattern", a.pattern);
    s.set("vectors", a.vectors);
    s.set("vector_bytes", a.vector_bytes);
    s.set("repeats", a.repeats);
    s.set("strategy", a.strategy);
    s.set_flag("allow_cache_resident", a.allow_cache_resident);

    let vectors: usize = s.get_or("vectors", DEFAULT_VECTORS)?;
    if vectors == 0 {
        bail!("vectors must be positive");
    }
    let vector_bytes: usize = match s.get("vector_bytes")? {
        Some(b) => b,
        None => default_vector_bytes(vectors),
    };
    let patterns: Vec<AccessPattern> = match s.raw("pattern") {
        None | Some("all") => AccessPattern::ALL.to_vec(),
        Some(_) => s.list("pattern")?.unwrap_or_default(),
    };
    let strategy = s.raw("strategy").map(|n| parse_strategy(n, vector_bytes / 4, None, None)).transpose()?;
    let make = |pattern| MembenchConfig {
        strategy,
        repeats: s.get_or("repeats", 3).unwrap_or(3),
        allow_cache_resident: s.bool("allow_cache_resident").unwrap_or(false),
        ..MembenchConfig::new(vector_bytes, vectors, pattern)
    };

    let mut results: BTreeMap<String, MembenchResult> = BTreeMap::new();
    let mut order = Vec::new();
    for &p in &patterns {
        for q in [p.aligned_counterpart(), p] {
            if let std::collections::btree_map::Entry::Vacant(slot) = results.entry(q.to_string()) {
                eprintln!("measuring {q}: {vectors} vectors of {vector_bytes} bytes");
                slot.insert(run_membench(&make(q))?);
                order.push(q);
            }
        }
    }
    let rows: Vec<(MembenchResult, f64)> = order
        .iter()
        .map(|q| {
            let r = results[&q.to_string()].clone();
            let ratio = offset_ratio(&r, &results[&q.aligned_counterpart().to_string()]);
            (r, ratio)
        })
        .collect();

    println!("{:<14}{:>16}{:>14}{:>16}{:>10}", "pattern", "bytes", "seconds", "GB/s", "ratio");
    for (r, ratio) in &rows {
        println!("{:<14}{:>16}{:>14.6}{:>16.3}{:>10.4}", r.pattern.to_string(), r.bytes, r.seconds, r.bandwidth / 1e9, ratio);
    }
    println!();
    for v in PUBLISHED_GPU_VALUES.iter().filter(|v| v.unit == "ratio") {
        println!("published {} ({}): {}", v.quantity, v.hardware, v.value);
    }
    println!("{NON_REPRODUCIBILITY_STATEMENT}");

    let mut out = OutDir::create(&a.common.out)?;
    io::write_membench_csv(&out.file("membench.csv")?, &rows)?;
    let manifest = out.finish(
        "membench",
        json!({ "vectorBytes": vector_bytes, "vectors": vectors, "patterns": patterns,
                "strategy": strategy, "settings": s.as_map() }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

pub fn spectrum(a: SpectrumArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref(), SPECTRUM_KEYS)?;
    s.set("input", a.input.as_ref().map(|p| p.display().to_string()));
    s.set("mean_seconds", a.mean_seconds);
    let input = PathBuf::from(s.raw("input").ok_or_else(|| anyhow!("--input is required"))?);
    let series = io::read_series(&input)?;
    if series.is_empty() {
        bail!("{} holds no samples", input.display());
    }
    let mean = match s.get::<f64>("mean_seconds")? {
        Some(m) => m,
        None => series.iter().sum::<f64>() / series.len() as f64,
    };
    let spectrum = iteration_time_spectrum(&series, mean)?;
    println!(
        "{} samples, sample rate {} Hz (1 / mean iteration time), bin width {} Hz",
        series.len(),
        num(spectrum.sample_rate_hz),
        num(spectrum.bin_width_hz)
    );
    match spectrum.peak_frequency_hz {
        Some(f) => {
            let k = spectrum.frequencies.iter().position(|&x| x == f).unwrap_or(0);
            println!("peak frequency {} Hz, amplitude {:.3e} s", num(f), spectrum.magnitudes[k]);
        }
        None => println!("no periodic component: the series is constant"),
    }
    let mut out = OutDir::create(&a.common.out)?;
    io::write_spectrum_csv(&out.file("spectrum.csv")?, &spectrum)?;
    io::write_jsonl(&out.file("spectrum.jsonl")?, std::slice::from_ref(&spectrum))?;
    let manifest = out.finish(
        "spectrum",
        json!({ "input": input, "meanIterationSeconds": mean, "samples": series.len(), "settings": s.as_map() }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn echoed_numbers_are_short() {
        assert_eq!(num(3.0 * 64.0 * 0.1 / 100.0 + 0.5), "0.692");
        assert_eq!(num(180000.00000001982), "180000");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1.953125), "1.953125");
    }
}
