use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use difftree::adjust::{
    adjust_full, bag_estimate_with, bonferroni, interpolate, permutation_null_with, Estimator,
    NullOptions, NullProvenance, NullSample, Statistic,
};
use difftree::data::{load_csv, GroupSpec};
use difftree::rng::derive_seed;
use difftree::sequential::{
    build_nulls, run_sequential, NullSource, SequentialOptions, WindowPlan,
};
use difftree::sim::{run_simulation, SimConfig};
use difftree::tree::{grow, TreeReport};
use difftree::{AtomicModel, Frame, FrameConfig, GrowConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{Atomic, Cli, Command, CommonArgs, Format, NullArg, SimArgs};
use crate::infer::infer_config;

pub type AnyResult<T> = Result<T, Box<dyn StdError + Send + Sync>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Grow,
    Permute,
    Bag,
    Seqdetect,
    Simulate,
}

/// Everything a run depends on. Embedded in each output file; replaying it
/// reproduces the outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub inputs: Vec<PathBuf>,
    pub frame: FrameConfig,
    pub grow: GrowConfig,
    pub r: usize,
    pub b: usize,
    pub seed: u64,
    pub null: NullArg,
    pub statistic: Statistic,
    pub bag: bool,
    pub window_days: i64,
    pub step_days: i64,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub pool: Option<PathBuf>,
    pub pattern: Option<PathBuf>,
    pub node: Option<usize>,
    pub n_delta: Vec<usize>,
    pub reps: usize,
    pub mix: Vec<f64>,
}

pub fn dispatch(cli: Cli) -> AnyResult<()> {
    let (run, workers, out_dir) = match cli.command {
        Command::Grow(a) => resolve(Task::Grow, &a, None)?,
        Command::Permute(a) => resolve(Task::Permute, &a, None)?,
        Command::Bag(a) => resolve(Task::Bag, &a, None)?,
        Command::Seqdetect(a) => resolve(Task::Seqdetect, &a, None)?,
        Command::Simulate { common, sim } => resolve(Task::Simulate, &common, Some(&sim))?,
        Command::Replay {
            file,
            workers,
            out_dir,
        } => (read_embedded(&file)?, workers, out_dir),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err("--workers must be at least 1".into());
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    fs::create_dir_all(&out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    pool.install(|| execute(&run, &out_dir))
}

fn resolve(
    task: Task,
    a: &CommonArgs,
    sim: Option<&SimArgs>,
) -> AnyResult<(RunConfig, Option<usize>, PathBuf)> {
    let single_group = matches!(task, Task::Seqdetect | Task::Simulate);
    if single_group && a.group_col.is_some() {
        return Err("--group-col does not apply to seqdetect or simulate".into());
    }
    if task == Task::Seqdetect && a.input2.is_some() {
        return Err("seqdetect reads a single event stream; drop --input2".into());
    }

    let mut inputs = vec![a.input.clone()];
    let pool_path = if task == Task::Simulate {
        a.input2.clone()
    } else {
        inputs.extend(a.input2.clone());
        None
    };

    let mut frame = match &a.schema {
        Some(path) => {
            let mut c = FrameConfig::from_path(path)?;
            if let Some(r) = &a.response {
                c.set_response(r)?;
            }
            if let Some(t) = &a.time_col {
                c.set_time(t)?;
            }
            c
        }
        None => {
            let response = a
                .response
                .as_deref()
                .ok_or("without --schema, --response is required")?;
            let mut scan: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            scan.extend(pool_path.as_deref());
            infer_config(
                &scan,
                response,
                a.time_col.as_deref(),
                a.group_col.as_deref(),
            )?
        }
    };
    if let Some(col) = &a.group_col {
        if frame.response().name == *col {
            return Err(format!("`{col}` is the response and cannot tag groups").into());
        }
        frame.variables.retain(|v| v.name != *col);
        frame.groups = GroupSpec {
            column: Some(col.clone()),
            ..GroupSpec::default()
        };
    } else if a.input2.is_some() || single_group {
        frame.groups = GroupSpec::default();
    }
    frame.validate()?;

    let model = match a.atomic {
        Atomic::Poisson => AtomicModel::Poisson,
        Atomic::Multinomial => AtomicModel::Multinomial,
        Atomic::Exposure => {
            if a.exposures.is_empty() {
                return Err("--atomic exposure needs --exposures".into());
            }
            AtomicModel::Exposure {
                exposures: a.exposures.clone(),
            }
        }
    };
    if a.atomic != Atomic::Exposure && !a.exposures.is_empty() {
        return Err("--exposures only applies with --atomic exposure".into());
    }
    let grow = GrowConfig {
        min_child_total: a.min_child,
        gamma: a.gamma,
        p_cut: a.pcut,
        alpha: a.alpha,
        prune_rule: a.prune,
        model,
        ..GrowConfig::default()
    };
    grow.validate()?;
    if a.r == 0 || a.b == 0 {
        return Err("--R and --B must be positive".into());
    }

    let sim = match (task, sim) {
        (Task::Simulate, Some(s)) => {
            if pool_path.is_none() && s.pattern.is_none() {
                return Err("simulate needs --input2 (signal pool) or --pattern".into());
            }
            Some(SimSpec {
                pool: pool_path,
                pattern: s.pattern.clone(),
                node: s.node,
                n_delta: s.n_delta.clone(),
                reps: s.reps,
                mix: s.mix.clone(),
            })
        }
        _ => None,
    };

    let seed = a.seed.unwrap_or_else(|| {
        let s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        eprintln!("seed = {s} (no --seed given)");
        s
    });

    let run = RunConfig {
        task,
        inputs,
        frame,
        grow,
        r: a.r,
        b: a.b,
        seed,
        null: a.null.clone().unwrap_or(NullArg::SelfPermutation),
        statistic: if a.raw_p {
            Statistic::Raw
        } else {
            Statistic::Bonferroni
        },
        bag: a.bag,
        window_days: a.window_days,
        step_days: a.step_days,
        format: a.format,
        sim,
    };
    Ok((run, a.workers, a.out_dir.clone()))
}

/// Pulls the run configuration out of any file this tool wrote.
pub fn read_embedded(path: &Path) -> AnyResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let json = if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text)?;
        v.get("run")
            .cloned()
            .ok_or_else(|| format!("{}: no `run` object", path.display()))?
    } else {
        let line = text
            .lines()
            .find_map(|l| l.strip_prefix(RUN_PREFIX))
            .ok_or_else(|| format!("{}: no `{RUN_PREFIX}` line", path.display()))?;
        serde_json::from_str(line)?
    };
    Ok(serde_json::from_value(json)
        .map_err(|e| format!("{}: embedded run configuration: {e}", path.display()))?)
}

const RUN_PREFIX: &str = "# run: ";

struct Outputs<'a> {
    dir: &'a Path,
    run: Value,
}

impl Outputs<'_> {
    fn text(&self, name: &str, body: &str) -> AnyResult<()> {
        let mut s = format!("{RUN_PREFIX}{}\n", self.run);
        s.push_str(body);
        self.put(name, s)
    }

    fn json(&self, name: &str, fields: Value) -> AnyResult<()> {
        let mut map = serde_json::Map::new();
        map.insert("run".into(), self.run.clone());
        if let Value::Object(f) = fields {
            map.extend(f);
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(map))?;
        s.push('\n');
        self.put(name, s)
    }

    fn put(&self, name: &str, contents: String) -> AnyResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(())
    }
}

fn audit(run: &RunConfig, m: Option<u64>) {
    log::info!(
        "audit: task={:?} seed={} R={} B={} m={}",
        run.task,
        run.seed,
        run.r,
        run.b,
        m.map_or("-".to_string(), |m| m.to_string())
    );
}

fn load_main(run: &RunConfig) -> AnyResult<Frame> {
    Ok(load_csv(&run.inputs, &run.frame)?)
}

/// A second file read with the same columns, as one group.
fn load_single(run: &RunConfig, path: &Path) -> AnyResult<Frame> {
    let mut c = run.frame.clone();
    c.groups = GroupSpec::default();
    Ok(load_csv(&[path], &c)?)
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn sci(p: f64) -> String {
    format!("{p:.4e}")
}

pub fn execute(run: &RunConfig, out_dir: &Path) -> AnyResult<()> {
    let out = Outputs {
        dir: out_dir,
        run: serde_json::to_value(run)?,
    };
    let stdout = match run.task {
        Task::Grow => cmd_grow(run, &out)?,
        Task::Permute => cmd_permute(run, &out)?,
        Task::Bag => cmd_bag(run, &out)?,
        Task::Seqdetect => cmd_seqdetect(run, &out)?,
        Task::Simulate => cmd_simulate(run, &out)?,
    };
    print!("{stdout}");
    Ok(())
}

fn cmd_grow(run: &RunConfig, out: &Outputs) -> AnyResult<String> {
    let frame = load_main(run)?;
    let tree = grow(&frame, &run.grow)?;
    audit(run, Some(tree.test_count));
    let report = tree.report();
    let p_bonf = bonferroni(report.min_p, report.test_count);
    let summary = format!(
        "min p = {}  m = {}  p' = {}\n",
        sci(report.min_p),
        report.test_count,
        sci(p_bonf)
    );
    let rendered = report.render_text();
    out.text("tree.txt", &rendered)?;
    let json = json!({ "p_bonferroni": p_bonf, "tree": report });
    out.json("tree.json", json.clone())?;
    Ok(match run.format {
        Format::Text => format!("{summary}{rendered}"),
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
        Format::Csv => {
            let mut s = csv_line(
                &["id", "depth", "condition", "W", "dof", "p", "terminal"].map(String::from),
            );
            report.root.visit(&mut |n| {
                s.push_str(&csv_line(&[
                    n.id.to_string(),
                    n.depth.to_string(),
                    n.condition.clone().unwrap_or_default(),
                    format!("{:e}", n.statistic),
                    n.dof.to_string(),
                    format!("{:e}", n.p),
                    n.is_terminal().to_string(),
                ]));
            });
            s
        }
    })
}

fn cmd_permute(run: &RunConfig, out: &Outputs) -> AnyResult<String> {
    let frame = load_main(run)?;
    let d = frame.n_groups();
    let options = |provenance| NullOptions {
        estimator: if run.bag {
            Estimator::Bagged { b: run.b }
        } else {
            Estimator::Tree
        },
        statistic: run.statistic,
        provenance,
    };
    let null_seed = derive_seed(run.seed, 1);
    let null = match &run.null {
        NullArg::SelfPermutation => permutation_null_with(
            &frame,
            d,
            run.r,
            &run.grow,
            null_seed,
            &options(NullProvenance::SelfPermutation),
        )?,
        NullArg::Historical(p) => permutation_null_with(
            &load_single(run, p)?,
            d,
            run.r,
            &run.grow,
            null_seed,
            &options(NullProvenance::HistoricalPermutation),
        )?,
        NullArg::File(p) => NullSample::read(p)?,
    };
    let (adj, tree) = adjust_full(&frame, &null, &run.grow, Some(derive_seed(run.seed, 2)))?;
    audit(run, Some(adj.m));
    out.text("null.txt", &null.to_text())?;
    let json = json!({ "adjustment": adj, "tree": tree.report() });
    out.json("adjustment.json", json.clone())?;
    Ok(match run.format {
        Format::Text => format!(
            "min p = {}  m = {}  p' = {}  p'' = {}  (R = {}, {}, {})\n",
            sci(adj.p),
            adj.m,
            sci(adj.p_bonferroni),
            sci(adj.p_permutation),
            adj.null_r,
            adj.provenance,
            adj.estimator
        ),
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
        Format::Csv => {
            csv_line(&["p", "m", "p_bonferroni", "p_permutation", "R"].map(String::from))
                + &csv_line(&[
                    format!("{:e}", adj.p),
                    adj.m.to_string(),
                    format!("{:e}", adj.p_bonferroni),
                    format!("{:e}", adj.p_permutation),
                    adj.null_r.to_string(),
                ])
        }
    })
}

fn cmd_bag(run: &RunConfig, out: &Outputs) -> AnyResult<String> {
    let frame = load_main(run)?;
    let tree = grow(&frame, &run.grow)?;
    audit(run, Some(tree.test_count));
    let est = bag_estimate_with(
        &frame,
        run.b,
        &run.grow,
        derive_seed(run.seed, 2),
        run.statistic,
    )?;
    // A stored bagged null turns the median into a permutation-adjusted value.
    let p_permutation = match &run.null {
        NullArg::File(p) => {
            let null = NullSample::read(p)?;
            if null.estimator != (Estimator::Bagged { b: run.b }) || null.statistic != run.statistic
            {
                return Err(format!(
                    "{}: null sample is {} / {}, run is bagged:{} / {}",
                    p.display(),
                    null.estimator,
                    null.statistic,
                    run.b,
                    run.statistic
                )
                .into());
            }
            Some(interpolate(est.median, &null))
        }
        _ => None,
    };
    let json = json!({
        "B": run.b,
        "median": est.median,
        "p_permutation": p_permutation,
        "observed_min_p": tree.min_p(),
        "m": tree.test_count,
        "values": est.values,
    });
    out.json("bag.json", json.clone())?;
    let mut table = csv_line(&["replicate".to_string(), "p".to_string()]);
    for (i, v) in est.values.iter().enumerate() {
        table.push_str(&csv_line(&[i.to_string(), format!("{v:e}")]));
    }
    out.text("bag.csv", &table)?;
    Ok(match run.format {
        Format::Text => {
            let mut s = format!("bagged median p' = {}  (B = {})\n", sci(est.median), run.b);
            if let Some(p) = p_permutation {
                let _ = writeln!(s, "p''' = {}", sci(p));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
        Format::Csv => table,
    })
}

fn cmd_seqdetect(run: &RunConfig, out: &Outputs) -> AnyResult<String> {
    let frame = load_main(run)?;
    if frame.schema().time_index().is_none() {
        return Err("seqdetect needs a time column (--time-col or role = \"time\")".into());
    }
    let plan = WindowPlan::for_frame(&frame, run.window_days, run.step_days)?;
    let options = SequentialOptions {
        grow: run.grow.clone(),
        statistic: run.statistic,
        r: run.r,
        bagging: run.bag.then_some(run.b),
        seed: run.seed,
    };
    let source = match &run.null {
        NullArg::SelfPermutation => NullSource::FirstWindows,
        NullArg::Historical(p) => NullSource::Historical(load_single(run, p)?),
        NullArg::File(p) => NullSource::Sample(NullSample::read(p)?),
    };
    let nulls = build_nulls(&frame, &plan, &source, &options)?;
    let report = run_sequential(&frame, &plan, &nulls, &options)?;
    audit(run, report.records.iter().map(|r| r.m).max());

    let mut buf = Vec::new();
    report.write_csv_to(&mut buf)?;
    let table = String::from_utf8(buf)?;
    out.text("sequential.csv", &table)?;
    out.text("null.txt", &nulls.tree.to_text())?;
    if let Some(b) = &nulls.bagged {
        out.text("null_bagged.txt", &b.to_text())?;
    }
    let json = json!({ "report": report });
    out.json("sequential.json", json.clone())?;
    Ok(match run.format {
        Format::Text => {
            let mut s = format!(
                "{} detection days, window {} days, step {} days, null R = {}\n",
                report.records.len(),
                plan.window_length,
                plan.step,
                report.null_r
            );
            for r in &report.records {
                let _ = write!(s, "day {:>6}  p'' = {}", r.day, sci(r.p_permutation));
                if let Some(b) = r.bagged_p_permutation {
                    let _ = write!(s, "  p''' = {}", sci(b));
                }
                if let Some(p) = &r.pattern {
                    let _ = write!(s, "  {}", p.describe());
                }
                s.push('\n');
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
        Format::Csv => table,
    })
}

fn read_tree_report(path: &Path) -> AnyResult<TreeReport> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: Value = serde_json::from_str(&text)?;
    let tree = v.get("tree").cloned().unwrap_or(v);
    Ok(serde_json::from_value(tree).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn cmd_simulate(run: &RunConfig, out: &Outputs) -> AnyResult<String> {
    let sim = run
        .sim
        .as_ref()
        .ok_or("simulate run without simulation settings")?;
    let base = load_main(run)?;
    let source = match &sim.pool {
        Some(p) => load_single(run, p)?,
        None => base.clone(),
    };
    let pool = match &sim.pattern {
        Some(path) => {
            let report = read_tree_report(path)?;
            let id = sim.node.unwrap_or_else(|| report.top_pattern().id);
            let pattern = report
                .pattern(id)
                .ok_or_else(|| format!("{}: no node {id}", path.display()))?;
            SimConfig::pool_from_pattern(&source, &pattern)?
        }
        None => source,
    };
    let config = SimConfig {
        n_delta: sim.n_delta.clone(),
        reps: sim.reps,
        mix: sim.mix.clone(),
        bagging: run.bag.then_some(run.b),
        r: run.r,
        seed: run.seed,
        grow: run.grow.clone(),
        statistic: run.statistic,
        ..SimConfig::new(base, pool)
    };
    audit(run, None);
    let result = run_simulation(&config)?;

    let mut buf = Vec::new();
    result.write_records_csv_to(&mut buf)?;
    out.text("simulation.csv", &String::from_utf8(buf)?)?;
    let mut buf = Vec::new();
    result.write_summary_csv_to(&mut buf)?;
    let summary = String::from_utf8(buf)?;
    out.text("simulation_summary.csv", &summary)?;
    out.text("null.txt", &result.tree_null.to_text())?;
    if let Some(b) = &result.bagged_null {
        out.text("null_bagged.txt", &b.to_text())?;
    }
    Ok(match run.format {
        Format::Text => {
            let mut s = String::from("n_delta  estimator  median [q25, q75]  failed\n");
            for r in &result.summaries {
                let _ = writeln!(
                    s,
                    "{:>7}  {:<9}  {} [{}, {}]  {}",
                    r.n_delta,
                    r.estimator.name(),
                    sci(r.median),
                    sci(r.q25),
                    sci(r.q75),
                    r.failed
                );
            }
            s
        }
        Format::Json => {
            serde_json::to_string_pretty(&json!({ "summaries": result.summaries }))? + "\n"
        }
        Format::Csv => summary,
    })
}
