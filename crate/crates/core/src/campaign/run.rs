use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{layout, Algorithm, CampaignConfig, CampaignError, Manifest, LAYOUT_VERSION};
use crate::difftest::{
    bugs_over_time_auc, differential_test, Classification, CompileOutcome, CompilerSpec, DefectRegistry, DiffError,
    DiffResult, SnapshotClock,
};
use crate::evolution::{population_fitness, DistanceKind, GenerationRecord, Individual, Modga, Sodga};
use crate::generator::RandomSearch;
use crate::grammar::EnrichedGrammar;
use crate::ir::{render, FeatureVector};
use crate::semantics::SemanticContext;

/// One line of `programs.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub id: u64,
    /// Seconds since campaign start at generation time.
    pub t: f64,
    pub size: u64,
    pub vector: FeatureVector,
    pub snippets: usize,
}

/// One line of `campaign.jsonl`: a differential test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub program: u64,
    pub t: f64,
    pub classification: Classification,
    pub signature: Option<String>,
    pub a: CompileOutcome,
    pub b: CompileOutcome,
}

/// One line of a snapshot file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SnapshotLine {
    Meta {
        index: u64,
        /// Nominal snapshot time.
        t: f64,
        elapsed: f64,
        programs: u64,
        unique_defects: usize,
        generation: usize,
        fitness_sum: Option<f64>,
        best_fitness_sum: Option<f64>,
        archive_size: Option<usize>,
    },
    Population {
        id: u64,
        vector: FeatureVector,
        fitness: Option<f64>,
    },
    Archive {
        id: u64,
        vector: FeatureVector,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub programs: u64,
    pub sample_failures: u64,
    pub mean_size: f64,
    pub median_size: f64,
    pub unique_defects: usize,
    pub defective_programs: u64,
    pub per_category: BTreeMap<String, usize>,
    pub auc: f64,
    /// Seconds actually spent; the AUC horizon.
    pub duration: f64,
    pub budget: f64,
    pub generations: usize,
    pub snapshots: u64,
}

enum Search<'a> {
    Rs { search: RandomSearch<'a>, failures: u64 },
    Sodga(Sodga<'a>),
    Modga(Modga<'a>),
}

impl<'a> Search<'a> {
    fn new(cfg: &CampaignConfig, g: &'a EnrichedGrammar, ctx: &'a SemanticContext) -> Result<Self, CampaignError> {
        let mut sampler = cfg.sampler.clone();
        sampler.rng_seed = cfg.seed;
        Ok(match cfg.algorithm {
            Algorithm::Rs => Search::Rs {
                search: RandomSearch::new(g, ctx, sampler),
                failures: 0,
            },
            Algorithm::Sodga => Search::Sodga(Sodga::new(g, ctx, sampler, cfg.ga.clone())?),
            Algorithm::Modga => Search::Modga(Modga::new(g, ctx, sampler, cfg.ga.clone())?),
        })
    }

    fn population(&self) -> &[Individual] {
        match self {
            Search::Rs { .. } => &[],
            Search::Sodga(s) => s.population(),
            Search::Modga(m) => m.population(),
        }
    }

    fn generation(&self) -> usize {
        match self {
            Search::Rs { .. } => 0,
            Search::Sodga(s) => s.generation(),
            Search::Modga(m) => m.generation(),
        }
    }

    /// The next programs to test: up to `want` random samples, the initial
    /// population, or one generation of offspring.
    fn next_batch(&mut self, want: usize) -> (Vec<Individual>, Option<GenerationRecord>) {
        let fresh = self.population().is_empty();
        let ids = |v: &[Individual]| v.iter().map(|i| i.id).collect::<Vec<_>>();
        match self {
            Search::Rs { search, failures } => {
                let mut out = Vec::with_capacity(want);
                for _ in 0..want {
                    match search.next_block() {
                        (k, Ok(block)) => out.push(Individual::new(k, block)),
                        (k, Err(e)) => {
                            log::warn!("sample {k} failed: {e}");
                            *failures += 1;
                        }
                    }
                }
                (out, None)
            }
            Search::Sodga(s) if fresh => {
                let pop = s.initialize();
                let record = GenerationRecord {
                    generation: 0,
                    offspring: ids(&pop),
                    population: ids(&pop),
                    fitness_sum: Some(s.best_fitness_sum()),
                    best_fitness_sum: Some(s.best_fitness_sum()),
                    archive_size: None,
                };
                (pop, Some(record))
            }
            Search::Sodga(s) => {
                let (off, record) = s.step();
                (off, Some(record))
            }
            Search::Modga(m) if fresh => {
                let pop = m.initialize();
                let record = GenerationRecord {
                    generation: 0,
                    offspring: ids(&pop),
                    population: ids(&pop),
                    fitness_sum: None,
                    best_fitness_sum: None,
                    archive_size: Some(m.archive().len()),
                };
                (pop, Some(record))
            }
            Search::Modga(m) => {
                let (off, record) = m.step();
                (off, Some(record))
            }
        }
    }

    fn failures(&self) -> u64 {
        match self {
            Search::Rs { failures, .. } => *failures,
            _ => 0,
        }
    }

    fn snapshot_lines(&self, distance: DistanceKind) -> Vec<SnapshotLine> {
        let pop = self.population();
        let fitness: Vec<Option<f64>> = match self {
            Search::Sodga(_) => {
                let vectors: Vec<FeatureVector> = pop.iter().map(|i| i.vector).collect();
                population_fitness(&vectors, distance).into_iter().map(Some).collect()
            }
            _ => vec![None; pop.len()],
        };
        let mut lines: Vec<SnapshotLine> = pop
            .iter()
            .zip(fitness)
            .map(|(i, fitness)| SnapshotLine::Population {
                id: i.id,
                vector: i.vector,
                fitness,
            })
            .collect();
        if let Search::Modga(m) = self {
            lines.extend(m.archive().entries().iter().map(|e| SnapshotLine::Archive {
                id: e.id,
                vector: e.vector,
            }));
        }
        lines
    }

    fn fitness_sums(&self, distance: DistanceKind) -> (Option<f64>, Option<f64>) {
        match self {
            Search::Sodga(s) => {
                let current = self
                    .snapshot_lines(distance)
                    .iter()
                    .filter_map(|l| match l {
                        SnapshotLine::Population { fitness, .. } => *fitness,
                        _ => None,
                    })
                    .sum();
                (Some(current), Some(s.best_fitness_sum()))
            }
            _ => (None, None),
        }
    }

    fn archive_size(&self) -> Option<usize> {
        match self {
            Search::Modga(m) => Some(m.archive().len()),
            _ => None,
        }
    }

    fn result(&self) -> Vec<&Individual> {
        match self {
            Search::Rs { .. } => Vec::new(),
            Search::Sodga(s) => s.best_population().iter().collect(),
            Search::Modga(m) => m.archive().entries().iter().collect(),
        }
    }
}

type Job = Result<(DiffResult, f64), DiffError>;

/// Runs the differential tests of one batch on `workers` threads. Results
/// come back in submission order, each with its completion time.
fn run_pool(jobs: &[PathBuf], a: &CompilerSpec, b: &CompilerSpec, workers: usize, start: Instant) -> Vec<Job> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Job>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = differential_test(&jobs[i], a, b).map(|d| (d, start.elapsed().as_secs_f64()));
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

struct Writers {
    programs: BufWriter<File>,
    campaign: BufWriter<File>,
    evolution: BufWriter<File>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CampaignError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(CampaignError::io(format!("cannot create {}", path.display())))
}

fn json_line<T: Serialize>(w: &mut impl Write, value: &T) -> Result<(), CampaignError> {
    serde_json::to_writer(&mut *w, value).expect("records serialize");
    w.write_all(b"\n").map_err(CampaignError::io("write log"))
}

fn prepare_run_dir(cfg: &CampaignConfig) -> Result<PathBuf, CampaignError> {
    let run_id = cfg.effective_run_id();
    let dir = cfg.output_dir().join(&run_id);
    if dir.exists() && fs::read_dir(&dir).map(|mut d| d.next().is_some()).unwrap_or(true) {
        return Err(CampaignError::Config(format!(
            "run directory {} already exists",
            dir.display()
        )));
    }
    for sub in [layout::PROGRAMS_DIR, layout::SNAPSHOTS_DIR] {
        fs::create_dir_all(dir.join(sub)).map_err(CampaignError::io(format!("cannot create {}", dir.display())))?;
    }
    let manifest = Manifest {
        layout_version: LAYOUT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        run_id,
        algorithm: cfg.algorithm,
        seed: cfg.seed,
    };
    let write = |name: &str, text: String| {
        fs::write(dir.join(name), text + "\n").map_err(CampaignError::io(format!("cannot write {name}")))
    };
    write(
        layout::MANIFEST,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    write(
        layout::CONFIG,
        serde_json::to_string_pretty(cfg).expect("config serializes"),
    )?;
    Ok(dir)
}

fn median(sorted: &[u64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2] as f64,
        n => (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0,
    }
}

/// Runs a campaign to completion and writes its run directory under the
/// configured output directory.
pub fn run_campaign(
    cfg: &CampaignConfig,
    grammar: &EnrichedGrammar,
    ctx: &SemanticContext,
) -> Result<CampaignSummary, CampaignError> {
    cfg.validate()?;
    let dir = prepare_run_dir(cfg)?;
    let mut out = Writers {
        programs: create(&dir.join(layout::PROGRAMS_LOG))?,
        campaign: create(&dir.join(layout::CAMPAIGN_LOG))?,
        evolution: create(&dir.join(layout::EVOLUTION_LOG))?,
    };
    let workers = cfg.effective_workers();
    let mut search = Search::new(cfg, grammar, ctx)?;
    let mut registry = DefectRegistry::with_dir(dir.join(layout::DEFECTS_DIR));
    let mut clock = SnapshotClock::new(cfg.snapshot_interval);
    let mut sizes = Vec::new();
    let mut defective = 0u64;
    let mut last_t = 0.0f64;
    let mut idle_batches = 0;
    let batch_size = (workers * 8).max(8);
    let start = Instant::now();

    log::info!("campaign {} started in {}", cfg.effective_run_id(), dir.display());
    loop {
        let elapsed = start.elapsed().as_secs_f64();
        let remaining = cfg.max_programs.map_or(u64::MAX, |m| m - sizes.len() as u64);
        if elapsed >= cfg.budget || remaining == 0 {
            break;
        }
        let (mut batch, record) = search.next_batch(batch_size.min(remaining as usize));
        batch.truncate(remaining.min(usize::MAX as u64) as usize);
        if let Some(record) = &record {
            json_line(&mut out.evolution, record)?;
        }
        if batch.is_empty() {
            idle_batches += 1;
            if idle_batches > 100 {
                return Err(CampaignError::Config(
                    "the generator keeps failing to produce programs".into(),
                ));
            }
            continue;
        }
        idle_batches = 0;

        let t_gen = start.elapsed().as_secs_f64();
        let mut paths = Vec::with_capacity(batch.len());
        for ind in &batch {
            let text = render(&ind.block);
            let path = dir.join(layout::PROGRAMS_DIR).join(layout::program_file(ind.id));
            fs::write(&path, &text).map_err(CampaignError::io(format!("cannot write {}", path.display())))?;
            let record = ProgramRecord {
                id: ind.id,
                t: t_gen,
                size: ind.vector.size(),
                vector: ind.vector,
                snippets: ind.block.len(),
            };
            json_line(&mut out.programs, &record)?;
            sizes.push(ind.vector.size());
            paths.push(path);
        }

        for ((ind, path), job) in
            batch
                .iter()
                .zip(&paths)
                .zip(run_pool(&paths, &cfg.compiler_a, &cfg.compiler_b, workers, start))
        {
            let (result, done) = job?;
            let t = last_t.max(done);
            last_t = t;
            if let Some(sig) = &result.signature {
                defective += 1;
                if registry.record(result.classification, sig, path, ind.id, t)? {
                    log::info!("new defect after {t:.1}s: {sig}");
                }
            }
            let record = LogRecord {
                program: ind.id,
                t,
                classification: result.classification,
                signature: result.signature,
                a: result.a,
                b: result.b,
            };
            json_line(&mut out.campaign, &record)?;
        }
        for w in [&mut out.programs, &mut out.campaign, &mut out.evolution] {
            w.flush().map_err(CampaignError::io("flush logs"))?;
        }
        write_snapshots(
            &dir,
            &mut clock,
            &search,
            cfg,
            start,
            sizes.len() as u64,
            registry.len(),
        )?;
    }
    let duration = start.elapsed().as_secs_f64();
    for k in clock.due(duration) {
        write_snapshot(
            &dir,
            k,
            &clock,
            &search,
            cfg,
            duration,
            sizes.len() as u64,
            registry.len(),
        )?;
    }

    let mut result = create(&dir.join(layout::RESULT))?;
    for ind in search.result() {
        json_line(
            &mut result,
            &SnapshotLine::Population {
                id: ind.id,
                vector: ind.vector,
                fitness: None,
            },
        )?;
    }
    for w in [&mut out.programs, &mut out.campaign, &mut out.evolution, &mut result] {
        w.flush().map_err(CampaignError::io("flush logs"))?;
    }
    registry.save(&dir.join(layout::DEFECTS))?;

    let auc = bugs_over_time_auc(&registry.timeline(), duration.max(f64::MIN_POSITIVE))?;
    let mut sorted = sizes.clone();
    sorted.sort_unstable();
    let summary = CampaignSummary {
        run_id: cfg.effective_run_id(),
        run_dir: dir.clone(),
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        programs: sizes.len() as u64,
        sample_failures: search.failures(),
        mean_size: if sizes.is_empty() {
            0.0
        } else {
            sizes.iter().sum::<u64>() as f64 / sizes.len() as f64
        },
        median_size: median(&sorted),
        unique_defects: registry.len(),
        defective_programs: defective,
        per_category: registry
            .per_category()
            .into_iter()
            .map(|(c, n)| (c.name().to_string(), n))
            .collect(),
        auc,
        duration,
        budget: cfg.budget,
        generations: search.generation(),
        snapshots: clock.emitted(),
    };
    fs::write(
        dir.join(layout::SUMMARY),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )
    .map_err(CampaignError::io("cannot write summary"))?;
    log::info!(
        "campaign {} finished: {} programs, {} unique defects",
        summary.run_id,
        summary.programs,
        summary.unique_defects
    );
    Ok(summary)
}

fn write_snapshots(
    dir: &Path,
    clock: &mut SnapshotClock,
    search: &Search,
    cfg: &CampaignConfig,
    start: Instant,
    programs: u64,
    defects: usize,
) -> Result<(), CampaignError> {
    let elapsed = start.elapsed().as_secs_f64();
    for k in clock.due(elapsed) {
        write_snapshot(dir, k, clock, search, cfg, elapsed, programs, defects)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_snapshot(
    dir: &Path,
    k: u64,
    clock: &SnapshotClock,
    search: &Search,
    cfg: &CampaignConfig,
    elapsed: f64,
    programs: u64,
    defects: usize,
) -> Result<(), CampaignError> {
    let path = dir.join(layout::SNAPSHOTS_DIR).join(format!("{k}.jsonl"));
    let mut w = create(&path)?;
    let (fitness_sum, best_fitness_sum) = search.fitness_sums(cfg.ga.distance);
    let meta = SnapshotLine::Meta {
        index: k,
        t: clock.time_of(k),
        elapsed,
        programs,
        unique_defects: defects,
        generation: search.generation(),
        fitness_sum,
        best_fitness_sum,
        archive_size: search.archive_size(),
    };
    json_line(&mut w, &meta)?;
    for line in search.snapshot_lines(cfg.ga.distance) {
        json_line(&mut w, &line)?;
    }
    w.flush().map_err(CampaignError::io("flush snapshot"))
}
