//! Two-level manager/worker pipeline for one selection round.
//!
//! ```text
//!  feeder --(input pool: portions)--> manager 0..M --(output pool)--> coordinator
//!                                       |  ^
//!                        (task queue)   v  |  (result queue)
//!                                     workers
//! ```
//!
//! The coordinator (first-level manager) cuts the task list into portions and
//! feeds them through a bounded input pool. Each second-level manager pulls
//! portions, hands their tasks to its workers through a bounded queue, and
//! folds worker buffers into a running top-P accumulator as they arrive. A
//! manager flushes its accumulator into the bounded output pool whenever one
//! of its portions completes. The coordinator folds flushed buffers into the
//! final result.
//!
//! The result is independent of scheduling because reduction is associative
//! and commutative over buffers with unique keys.

use std::any::Any;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::pairgen::{reduce_topp, scan_block_pair, BlockPlan, BlockTask, EligibilitySnapshot, TopPBuffer};

/// Environment variable capping the total number of worker threads.
pub const THREADS_ENV: &str = "PARCLUST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub managers: usize,
    pub workers_per_manager: usize,
    pub input_buffers: usize,
    pub output_buffers: usize,
    pub buffers_per_worker: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let managers = 4;
        let threads = thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            managers,
            workers_per_manager: (threads / managers).max(1),
            input_buffers: 12,
            output_buffers: 12,
            buffers_per_worker: 3,
        }
    }
}

impl PipelineConfig {
    /// Default buffer settings with the given manager and worker counts.
    pub fn with_workers(managers: usize, workers_per_manager: usize) -> Self {
        Self { managers, workers_per_manager, ..Self::default() }
            .with_min_input_buffers()
    }

    fn with_min_input_buffers(mut self) -> Self {
        self.input_buffers = self.input_buffers.max(self.managers);
        self
    }

    pub fn total_workers(&self) -> usize {
        self.managers * self.workers_per_manager
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("managers", self.managers),
            ("workers-per-manager", self.workers_per_manager),
            ("input-buffers", self.input_buffers),
            ("output-buffers", self.output_buffers),
            ("buffers-per-worker", self.buffers_per_worker),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.input_buffers < self.managers {
            return Err(Error::InvalidConfig(format!(
                "input-buffers ({}) must be at least managers ({})",
                self.input_buffers, self.managers
            )));
        }
        Ok(())
    }

    /// Limits total worker threads to `cap`, shrinking workers first.
    pub fn capped(mut self, cap: usize) -> Self {
        let cap = cap.max(1);
        if self.total_workers() > cap {
            self.managers = self.managers.min(cap);
            self.workers_per_manager = (cap / self.managers).max(1);
        }
        self
    }

    /// Applies the `PARCLUST_THREADS` cap when set.
    pub fn capped_by_env(self) -> Self {
        match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(cap) => self.capped(cap),
            None => self,
        }
    }

    /// Upper bound on top-P buffers alive inside the pipeline at any moment.
    pub fn buffer_bound(&self) -> usize {
        self.input_buffers
            + self.output_buffers
            + self.managers * self.workers_per_manager * self.buffers_per_worker
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub manager: usize,
    pub worker: usize,
    pub busy_secs: f64,
    pub idle_secs: f64,
    pub tasks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManagerStats {
    pub manager: usize,
    pub reduce_secs: f64,
    pub portions: usize,
    pub flushes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilizationStats {
    pub wall_secs: f64,
    pub rounds: usize,
    pub tasks_executed: usize,
    pub peak_live_buffers: usize,
    pub workers: Vec<WorkerStats>,
    pub managers: Vec<ManagerStats>,
    /// Tasks in execution order; kept in memory only.
    #[serde(skip)]
    pub executed: Vec<BlockTask>,
}

impl UtilizationStats {
    /// Busy fraction over all workers, as a percentage.
    pub fn aggregate_utilization(&self) -> f64 {
        let busy: f64 = self.workers.iter().map(|w| w.busy_secs).sum();
        let idle: f64 = self.workers.iter().map(|w| w.idle_secs).sum();
        percent(busy, busy + idle)
    }

    /// Accumulates another round's stats; workers and managers are matched by
    /// their (manager, worker) position.
    pub fn absorb(&mut self, other: UtilizationStats) {
        self.wall_secs += other.wall_secs;
        self.rounds += other.rounds;
        self.tasks_executed += other.tasks_executed;
        self.peak_live_buffers = self.peak_live_buffers.max(other.peak_live_buffers);
        for w in other.workers {
            match self.workers.iter_mut().find(|s| s.manager == w.manager && s.worker == w.worker) {
                Some(s) => {
                    s.busy_secs += w.busy_secs;
                    s.idle_secs += w.idle_secs;
                    s.tasks += w.tasks;
                }
                None => self.workers.push(w),
            }
        }
        for m in other.managers {
            match self.managers.iter_mut().find(|s| s.manager == m.manager) {
                Some(s) => {
                    s.reduce_secs += m.reduce_secs;
                    s.portions += m.portions;
                    s.flushes += m.flushes;
                }
                None => self.managers.push(m),
            }
        }
        self.executed.extend(other.executed);
    }
}

fn percent(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

/// Per-worker busy percentages followed by the aggregate.
pub fn report_utilization(stats: &UtilizationStats) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "rounds {}  tasks {}  wall {:.3}s  peak buffers {}",
        stats.rounds, stats.tasks_executed, stats.wall_secs, stats.peak_live_buffers
    );
    for w in &stats.workers {
        let _ = writeln!(
            out,
            "worker {}.{:<3} busy {:>9.3}s  idle {:>9.3}s  tasks {:>7}  utilization {:>6.2}%",
            w.manager,
            w.worker,
            w.busy_secs,
            w.idle_secs,
            w.tasks,
            percent(w.busy_secs, w.busy_secs + w.idle_secs)
        );
    }
    for m in &stats.managers {
        let _ = writeln!(
            out,
            "manager {:<3} reduce {:>9.3}s  portions {:>6}  flushes {:>6}",
            m.manager, m.reduce_secs, m.portions, m.flushes
        );
    }
    let _ = writeln!(out, "aggregate utilization {:.2}%", stats.aggregate_utilization());
    out
}

/// Runs every task of `plan` through the pipeline and returns the global
/// top-`p` buffer, identical to [`global_top_p`](crate::pairgen::global_top_p).
pub fn run_round(
    dataset: &Dataset,
    snapshot: &EligibilitySnapshot,
    plan: &BlockPlan,
    p: usize,
    config: &PipelineConfig,
) -> Result<(TopPBuffer, UtilizationStats)> {
    run_tasks(plan.tasks(), p, config, |task| scan_block_pair(dataset, snapshot, plan, task, p))
}

struct Portion<'t> {
    id: usize,
    tasks: &'t [BlockTask],
}

struct Job {
    portion: usize,
    portion_len: usize,
    task: BlockTask,
}

enum WorkerMsg {
    Done { portion: usize, portion_len: usize, buffer: TopPBuffer },
    Failed { task: BlockTask, message: String },
}

enum ManagerMsg {
    Flush(TopPBuffer),
    Failed { task: BlockTask, message: String },
    Finished { manager: ManagerStats, workers: Vec<(WorkerStats, Vec<BlockTask>)> },
}

struct Shared {
    abort: AtomicBool,
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl Shared {
    fn acquire(&self) {
        let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn release(&self) {
        self.live.fetch_sub(1, Ordering::SeqCst);
    }

    fn aborted(&self) -> bool {
        self.abort.load(Ordering::Relaxed)
    }
}

/// Generic pipeline over an arbitrary scan function.
///
/// A panic inside `scan` aborts the round; the error names the task.
pub fn run_tasks<F>(
    tasks: &[BlockTask],
    p: usize,
    config: &PipelineConfig,
    scan: F,
) -> Result<(TopPBuffer, UtilizationStats)>
where
    F: Fn(BlockTask) -> TopPBuffer + Sync,
{
    config.validate()?;
    if p == 0 {
        return Err(Error::InvalidConfig("pairs-per-batch must be at least 1".into()));
    }
    let config = config.capped_by_env();
    let started = Instant::now();
    let shared = Shared {
        abort: AtomicBool::new(false),
        live: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    };
    let portion_len = tasks.len().div_ceil(config.managers * 4).max(1);
    let scan = &scan;
    let shared = &shared;

    let (result, failure, manager_stats) = thread::scope(|s| {
        let (input_tx, input_rx) = bounded::<Portion<'_>>(config.input_buffers);
        let (output_tx, output_rx) = bounded::<ManagerMsg>(config.output_buffers);

        s.spawn(move || {
            for (id, chunk) in tasks.chunks(portion_len).enumerate() {
                if shared.aborted() || input_tx.send(Portion { id, tasks: chunk }).is_err() {
                    break;
                }
            }
        });
        for m in 0..config.managers {
            let input_rx = input_rx.clone();
            let output_tx = output_tx.clone();
            s.spawn(move || manage(m, &config, p, input_rx, output_tx, scan, shared));
        }
        drop(input_rx);
        drop(output_tx);

        let mut acc = TopPBuffer::new(p);
        let mut failure = None;
        let mut finished = Vec::new();
        for msg in output_rx {
            match msg {
                ManagerMsg::Flush(buffer) => {
                    acc = reduce_topp(acc, buffer, p);
                    shared.release();
                }
                ManagerMsg::Failed { task, message } => {
                    shared.abort.store(true, Ordering::SeqCst);
                    failure.get_or_insert(Error::WorkerFailed { task, message });
                }
                ManagerMsg::Finished { manager, workers } => finished.push((manager, workers)),
            }
        }
        (acc, failure, finished)
    });

    if let Some(err) = failure {
        return Err(err);
    }
    let mut stats = UtilizationStats {
        wall_secs: started.elapsed().as_secs_f64(),
        rounds: 1,
        peak_live_buffers: shared.peak.load(Ordering::SeqCst),
        ..Default::default()
    };
    let mut finished = manager_stats;
    finished.sort_by_key(|(m, _)| m.manager);
    for (manager, workers) in finished {
        stats.managers.push(manager);
        for (w, executed) in workers {
            stats.tasks_executed += executed.len();
            stats.executed.extend(executed);
            stats.workers.push(w);
        }
    }
    if stats.tasks_executed != tasks.len() {
        return Err(Error::Pipeline(format!(
            "{} of {} tasks executed",
            stats.tasks_executed,
            tasks.len()
        )));
    }
    Ok((result, stats))
}

/// Second-level manager: a dispatcher thread feeds the workers while this
/// thread folds their results.
fn manage<F>(
    id: usize,
    config: &PipelineConfig,
    p: usize,
    input: Receiver<Portion<'_>>,
    output: Sender<ManagerMsg>,
    scan: &F,
    shared: &Shared,
) where
    F: Fn(BlockTask) -> TopPBuffer + Sync,
{
    let workers = config.workers_per_manager;
    let slots = workers * config.buffers_per_worker;
    let mut stats = ManagerStats { manager: id, ..Default::default() };

    let worker_stats = thread::scope(|s| {
        let (job_tx, job_rx) = bounded::<Job>(slots);
        // Workers hold one buffer each while handing it over, so the result
        // queue takes the remaining slots.
        let (result_tx, result_rx) = bounded::<WorkerMsg>(slots - workers);

        let dispatcher = s.spawn(move || {
            let mut portions = 0;
            'outer: for portion in input {
                portions += 1;
                for &task in portion.tasks {
                    if shared.aborted() {
                        break 'outer;
                    }
                    let job = Job { portion: portion.id, portion_len: portion.tasks.len(), task };
                    if job_tx.send(job).is_err() {
                        break 'outer;
                    }
                }
            }
            portions
        });
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let job_rx = job_rx.clone();
                let result_tx = result_tx.clone();
                s.spawn(move || work(id, w, job_rx, result_tx, scan, shared))
            })
            .collect();
        drop(job_rx);
        drop(result_tx);

        let mut acc: Option<TopPBuffer> = None;
        let mut remaining: HashMap<usize, usize> = HashMap::new();
        for msg in result_rx {
            match msg {
                WorkerMsg::Done { portion, portion_len, buffer } => {
                    let t = Instant::now();
                    acc = Some(match acc.take() {
                        Some(current) => {
                            shared.release();
                            reduce_topp(current, buffer, p)
                        }
                        None => buffer,
                    });
                    stats.reduce_secs += t.elapsed().as_secs_f64();
                    let left = remaining.entry(portion).or_insert(portion_len);
                    *left -= 1;
                    if *left == 0 {
                        remaining.remove(&portion);
                        if let Some(buffer) = acc.take() {
                            stats.flushes += 1;
                            if output.send(ManagerMsg::Flush(buffer)).is_err() {
                                shared.abort.store(true, Ordering::SeqCst);
                            }
                        }
                    }
                }
                WorkerMsg::Failed { task, message } => {
                    shared.abort.store(true, Ordering::SeqCst);
                    let _ = output.send(ManagerMsg::Failed { task, message });
                }
            }
        }
        if let Some(buffer) = acc.take() {
            // Only reachable after an abort left a portion incomplete.
            shared.release();
            drop(buffer);
        }
        stats.portions = dispatcher.join().unwrap_or(0);
        handles.into_iter().filter_map(|h| h.join().ok()).collect::<Vec<_>>()
    });
    let _ = output.send(ManagerMsg::Finished { manager: stats, workers: worker_stats });
}

fn work<F>(
    manager: usize,
    worker: usize,
    jobs: Receiver<Job>,
    results: Sender<WorkerMsg>,
    scan: &F,
    shared: &Shared,
) -> (WorkerStats, Vec<BlockTask>)
where
    F: Fn(BlockTask) -> TopPBuffer + Sync,
{
    let started = Instant::now();
    let mut busy = Duration::ZERO;
    let mut executed = Vec::new();
    for job in jobs {
        if shared.aborted() {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| scan(job.task)));
        busy += t.elapsed();
        let msg = match outcome {
            Ok(buffer) => {
                executed.push(job.task);
                shared.acquire();
                WorkerMsg::Done { portion: job.portion, portion_len: job.portion_len, buffer }
            }
            Err(payload) => {
                shared.abort.store(true, Ordering::SeqCst);
                WorkerMsg::Failed { task: job.task, message: panic_message(payload.as_ref()) }
            }
        };
        if results.send(msg).is_err() {
            break;
        }
    }
    let lifetime = started.elapsed();
    let stats = WorkerStats {
        manager,
        worker,
        busy_secs: busy.as_secs_f64(),
        idle_secs: lifetime.saturating_sub(busy).as_secs_f64(),
        tasks: executed.len(),
    };
    (stats, executed)
}

fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}
