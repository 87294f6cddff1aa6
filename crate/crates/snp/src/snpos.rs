//! A toy operating-system environment whose bookkeeping runs on the spike
//! devices: job ordering goes through the sorter, step accounting through
//! the adder, and completion checks through the equality checker. Native
//! arithmetic recomputes each result as a cross-check assertion, never as
//! a fallback.
//!
//! Jobs are register machines with a priority, a resource request, and an
//! execution scope. Dispatch is quantum-based: each tick the highest
//! priority queued job (ties broken by ascending id) runs for one quantum;
//! completed jobs return their resources to the pool.
//!
//! Batch file format, `#` comments:
//!
//! ```text
//! pool cpu=4,mem=8
//! job j1 priority 5 scope fg resources cpu=2 body machines/count_down.rm
//! job j2 priority 3 scope bg body machines/two_increment.rm
//! ```
//!
//! The `pool` line is optional; without it the pool defaults to the sum of
//! all requests per resource, so every job admits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::chooser::Chooser;
use crate::devices::{
    add_numbers_with, adder_device, equality_device, numbers_equal_with, sort_numbers_with,
    sorter_device, DeviceHandle,
};
use crate::regmachine::{parse_machine, step_machine, MachineError, MachineState, RegisterMachine};

/// Execution scope of a job. Carried and logged; dispatch ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Foreground,
    Background,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Foreground => "fg",
            Scope::Background => "bg",
        })
    }
}

/// A job: a register machine body plus its scheduling metadata. The
/// instruction count mirrors the body and is validated on submission.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub id: String,
    pub body: RegisterMachine,
    pub instruction_count: usize,
    pub resources: BTreeMap<String, u64>,
    pub scope: Scope,
    pub priority: u64,
}

impl JobSpec {
    pub fn new(
        id: impl Into<String>,
        body: RegisterMachine,
        resources: BTreeMap<String, u64>,
        scope: Scope,
        priority: u64,
    ) -> JobSpec {
        JobSpec {
            id: id.into(),
            instruction_count: body.instruction_count(),
            body,
            resources,
            scope,
            priority,
        }
    }
}

/// Admission verdict for a submitted job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    /// Rejected; names the first resource that could not be granted.
    Rejected {
        resource: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OsError {
    #[error("duplicate job id '{0}'")]
    DuplicateJob(String),
    #[error("unknown job id '{0}'")]
    UnknownJob(String),
    #[error("job '{id}' declares {declared} instructions but its body has {actual}")]
    InstructionCountMismatch {
        id: String,
        declared: usize,
        actual: usize,
    },
    #[error("job '{id}' priority {priority} exceeds the sorter capacity {vmax}")]
    PriorityExceedsVmax {
        id: String,
        priority: u64,
        vmax: u64,
    },
    #[error("jobs file line {line}: {message}")]
    Batch { line: usize, message: String },
    #[error("job body '{path}': {source}")]
    Body { path: String, source: MachineError },
    #[error(transparent)]
    Machine(#[from] MachineError),
}

/// One dispatch decision: the sorter's job order for the tick, the job that
/// ran, how many machine steps it executed, and the accounting total after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchRecord {
    pub tick: u64,
    pub order: Vec<String>,
    pub chosen: String,
    pub steps: u64,
    pub total_after: u64,
}

/// Steps executed in one quantum and whether the body halted during it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantumReport {
    pub steps: u64,
    pub halted: bool,
}

#[derive(Debug, Clone)]
struct JobState {
    spec: JobSpec,
    machine: MachineState,
    halted: bool,
}

/// Tunables of the environment.
#[derive(Debug, Clone, Copy)]
pub struct OsConfig {
    /// Largest priority the sorter is built for.
    pub vmax: u64,
    /// Machine steps one tick grants the dispatched job.
    pub quantum: u64,
}

impl Default for OsConfig {
    fn default() -> Self {
        OsConfig {
            vmax: 64,
            quantum: 8,
        }
    }
}

/// The operating-system environment: devices, resource pool, queue, and
/// the append-only dispatch history.
#[derive(Debug, Clone)]
pub struct Environment {
    pub config: OsConfig,
    adder: DeviceHandle,
    equality: DeviceHandle,
    pool: BTreeMap<String, u64>,
    initial_pool: BTreeMap<String, u64>,
    jobs: BTreeMap<String, JobState>,
    known_ids: BTreeSet<String>,
    queue: Vec<String>,
    completed: Vec<String>,
    tick: u64,
    tick_steps: Vec<u64>,
    records: Vec<DispatchRecord>,
    submissions: Vec<(String, Admission)>,
}

impl Environment {
    pub fn new(pool: BTreeMap<String, u64>, config: OsConfig) -> Environment {
        Environment {
            config,
            adder: adder_device(),
            equality: equality_device(),
            initial_pool: pool.clone(),
            pool,
            jobs: BTreeMap::new(),
            known_ids: BTreeSet::new(),
            queue: Vec::new(),
            completed: Vec::new(),
            tick: 0,
            tick_steps: Vec::new(),
            records: Vec::new(),
            submissions: Vec::new(),
        }
    }

    /// Device names available to the environment.
    pub fn device_names(&self) -> Vec<&'static str> {
        vec!["adder", "equality", "sorter"]
    }

    pub fn pool(&self) -> &BTreeMap<String, u64> {
        &self.pool
    }

    pub fn initial_pool(&self) -> &BTreeMap<String, u64> {
        &self.initial_pool
    }

    pub fn records(&self) -> &[DispatchRecord] {
        &self.records
    }

    pub fn submissions(&self) -> &[(String, Admission)] {
        &self.submissions
    }

    pub fn completed(&self) -> &[String] {
        &self.completed
    }

    pub fn queued(&self) -> &[String] {
        &self.queue
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_steps(&self) -> &[u64] {
        &self.tick_steps
    }

    pub fn job_priority(&self, id: &str) -> Option<u64> {
        self.jobs.get(id).map(|j| j.spec.priority)
    }

    /// For every resource: available units plus the holdings of live jobs
    /// must equal the initial pool.
    pub fn conservation_holds(&self) -> bool {
        let mut held: BTreeMap<&str, u64> = BTreeMap::new();
        for job in self.jobs.values() {
            if job.halted {
                continue;
            }
            for (name, units) in &job.spec.resources {
                *held.entry(name.as_str()).or_default() += units;
            }
        }
        self.initial_pool.iter().all(|(name, &initial)| {
            let available = self.pool.get(name).copied().unwrap_or(0);
            let holdings = held.get(name.as_str()).copied().unwrap_or(0);
            available + holdings == initial
        }) && self
            .pool
            .keys()
            .all(|name| self.initial_pool.contains_key(name))
    }

    /// Admit a job when every requested resource is available, debiting the
    /// pool; otherwise record a rejection naming the blocking resource.
    pub fn submit_job(&mut self, spec: JobSpec) -> Result<Admission, OsError> {
        let id = spec.id.clone();
        if !self.known_ids.insert(id.clone()) {
            return Err(OsError::DuplicateJob(id));
        }
        if spec.instruction_count != spec.body.instruction_count() {
            return Err(OsError::InstructionCountMismatch {
                id,
                declared: spec.instruction_count,
                actual: spec.body.instruction_count(),
            });
        }
        let blocking = spec
            .resources
            .iter()
            .find(|(name, &units)| self.pool.get(*name).copied().unwrap_or(0) < units);
        let verdict = if let Some((resource, _)) = blocking {
            Admission::Rejected {
                resource: resource.clone(),
            }
        } else {
            for (name, units) in &spec.resources {
                *self.pool.entry(name.clone()).or_default() -= units;
            }
            let machine = spec.body.fresh_state();
            self.queue.push(id.clone());
            self.jobs.insert(
                id.clone(),
                JobState {
                    spec,
                    machine,
                    halted: false,
                },
            );
            Admission::Admitted
        };
        self.submissions.push((id, verdict.clone()));
        debug_assert!(self.conservation_holds());
        Ok(verdict)
    }

    /// Order the queue by feeding every priority to the sorter device:
    /// highest first, ties broken by ascending job id. The native order is
    /// recomputed and asserted against the device's answer.
    pub fn schedule_round(&self) -> Result<Vec<String>, OsError> {
        if self.queue.is_empty() {
            return Ok(Vec::new());
        }
        for id in &self.queue {
            let priority = self.jobs[id].spec.priority;
            if priority > self.config.vmax {
                return Err(OsError::PriorityExceedsVmax {
                    id: id.clone(),
                    priority,
                    vmax: self.config.vmax,
                });
            }
        }
        let priorities: Vec<u64> = self
            .queue
            .iter()
            .map(|id| self.jobs[id].spec.priority)
            .collect();
        let sorter = sorter_device(priorities.len(), self.config.vmax);
        let sorted = sort_numbers_with(&sorter, &priorities).expect("priorities fit the sorter");

        let mut native = priorities.clone();
        native.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(
            sorted, native,
            "sorter disagrees with native descending sort"
        );

        // Spend the sorted multiset on the jobs: per priority, ids ascend.
        let mut by_priority: BTreeMap<u64, Vec<String>> = BTreeMap::new();
        for id in &self.queue {
            by_priority
                .entry(self.jobs[id].spec.priority)
                .or_default()
                .push(id.clone());
        }
        for ids in by_priority.values_mut() {
            ids.sort();
        }
        let mut order = Vec::with_capacity(self.queue.len());
        for &priority in &sorted {
            let bucket = by_priority
                .get_mut(&priority)
                .expect("sorted value came from the queue");
            order.push(bucket.remove(0));
        }
        Ok(order)
    }

    /// Run a job's body for up to `quantum` machine steps. Completion
    /// releases the job's resources back to the pool.
    pub fn execute_quantum(&mut self, id: &str, quantum: u64) -> Result<QuantumReport, OsError> {
        let job = self
            .jobs
            .get_mut(id)
            .ok_or_else(|| OsError::UnknownJob(id.to_string()))?;
        let mut executed = 0;
        let mut chooser = Chooser::first_declared();
        let JobState { spec, machine, .. } = job;
        while executed < quantum && !machine.is_halted(&spec.body) {
            step_machine(&spec.body, machine, &mut chooser)?;
            executed += 1;
        }
        let halted = job.machine.is_halted(&job.spec.body);
        if halted && !job.halted {
            job.halted = true;
            let resources = job.spec.resources.clone();
            let done_id = id.to_string();
            for (name, units) in resources {
                *self.pool.entry(name).or_default() += units;
            }
            self.queue.retain(|q| q != &done_id);
            self.completed.push(done_id);
        }
        debug_assert!(self.conservation_holds());
        Ok(QuantumReport {
            steps: executed,
            halted,
        })
    }

    /// Total machine steps across all ticks, folded pairwise through the
    /// adder device and asserted against the native sum.
    pub fn account_total(&self) -> u64 {
        let mut total = 0u64;
        for &steps in &self.tick_steps {
            total = add_numbers_with(&self.adder, total, steps);
        }
        assert_eq!(
            total,
            self.tick_steps.iter().sum::<u64>(),
            "adder device disagrees with native accounting"
        );
        total
    }

    /// Has the job's body halted? The remaining-work counter (one while
    /// running, zero at halt) is compared to zero through the equality
    /// device and cross-checked natively.
    pub fn job_finished(&self, id: &str) -> Result<bool, OsError> {
        let job = self
            .jobs
            .get(id)
            .ok_or_else(|| OsError::UnknownJob(id.to_string()))?;
        let remaining: u64 = if job.halted { 0 } else { 1 };
        let finished = numbers_equal_with(&self.equality, remaining, 0);
        assert_eq!(
            finished,
            remaining == 0,
            "equality device disagrees with native zero test"
        );
        Ok(finished)
    }

    fn record_tick(&mut self, order: Vec<String>, chosen: String, steps: u64) {
        self.tick_steps.push(steps);
        let total_after = self.account_total();
        self.records.push(DispatchRecord {
            tick: self.tick,
            order,
            chosen,
            steps,
            total_after,
        });
        self.tick += 1;
    }
}

/// Full trace of a scheduling run: every submission verdict and every tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OsTrace {
    pub submissions: Vec<(String, Admission)>,
    pub records: Vec<DispatchRecord>,
}

/// Submit all jobs in order, then tick until every admitted job completes
/// or the tick budget runs out. Each tick schedules the queue, grants one
/// quantum to the head job, and updates the accounting.
pub fn run_os(
    mut env: Environment,
    jobs: Vec<JobSpec>,
    ticks: u64,
) -> Result<(Environment, OsTrace), OsError> {
    for spec in jobs {
        env.submit_job(spec)?;
    }
    for _ in 0..ticks {
        if env.queue.is_empty() {
            break;
        }
        let order = env.schedule_round()?;
        let chosen = order[0].clone();
        let report = env.execute_quantum(&chosen, env.config.quantum)?;
        env.record_tick(order, chosen, report.steps);
        assert!(env.conservation_holds(), "resource conservation violated");
    }
    let trace = OsTrace {
        submissions: env.submissions.clone(),
        records: env.records.clone(),
    };
    Ok((env, trace))
}

/// A parsed batch: the declared pool, if any, and the job list.
pub type ParsedBatch = (Option<BTreeMap<String, u64>>, Vec<JobSpec>);

/// Parse a job batch file. Body paths are resolved relative to `base_dir`.
pub fn parse_jobs_file(text: &str, base_dir: &Path) -> Result<ParsedBatch, OsError> {
    let mut pool = None;
    let mut jobs = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let batch_err = |message: String| OsError::Batch {
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "pool" => {
                if pool.is_some() {
                    return Err(batch_err("duplicate pool line".into()));
                }
                if tokens.len() != 2 {
                    return Err(batch_err("expected 'pool <name>=<units>[,...]'".into()));
                }
                pool = Some(parse_resources(tokens[1], line_no)?);
            }
            "job" => {
                let mut it = tokens[1..].iter();
                let id = it
                    .next()
                    .ok_or_else(|| batch_err("job line needs an id".into()))?
                    .to_string();
                let mut priority = None;
                let mut scope = None;
                let mut resources = BTreeMap::new();
                let mut body_path = None;
                while let Some(&key) = it.next() {
                    let value = it
                        .next()
                        .ok_or_else(|| batch_err(format!("'{key}' needs a value")))?;
                    match key {
                        "priority" => {
                            priority =
                                Some(value.parse::<u64>().map_err(|_| {
                                    batch_err(format!("invalid priority '{value}'"))
                                })?);
                        }
                        "scope" => {
                            scope = Some(match *value {
                                "fg" => Scope::Foreground,
                                "bg" => Scope::Background,
                                other => {
                                    return Err(batch_err(format!("unknown scope '{other}'")));
                                }
                            });
                        }
                        "resources" => {
                            resources = parse_resources(value, line_no)?;
                        }
                        "body" => body_path = Some(value.to_string()),
                        other => {
                            return Err(batch_err(format!("unknown job field '{other}'")));
                        }
                    }
                }
                let priority =
                    priority.ok_or_else(|| batch_err("job line needs 'priority <p>'".into()))?;
                let scope =
                    scope.ok_or_else(|| batch_err("job line needs 'scope <fg|bg>'".into()))?;
                let body_path =
                    body_path.ok_or_else(|| batch_err("job line needs 'body <path>'".into()))?;
                let full = base_dir.join(&body_path);
                let source = std::fs::read_to_string(&full).map_err(|e| {
                    batch_err(format!("cannot read body '{}': {e}", full.display()))
                })?;
                let body = parse_machine(&source).map_err(|source| OsError::Body {
                    path: body_path.clone(),
                    source,
                })?;
                jobs.push(JobSpec::new(id, body, resources, scope, priority));
            }
            other => return Err(batch_err(format!("unknown directive '{other}'"))),
        }
    }
    Ok((pool, jobs))
}

fn parse_resources(text: &str, line: usize) -> Result<BTreeMap<String, u64>, OsError> {
    let mut out = BTreeMap::new();
    for part in text.split(',') {
        let (name, units) = part.split_once('=').ok_or(OsError::Batch {
            line,
            message: format!("expected <name>=<units>, found '{part}'"),
        })?;
        let units = units.parse::<u64>().map_err(|_| OsError::Batch {
            line,
            message: format!("invalid unit count '{units}'"),
        })?;
        out.insert(name.to_string(), units);
    }
    Ok(out)
}

/// Default pool when a batch declares none: the per-resource sum of all
/// requests, so every job can admit.
pub fn default_pool(jobs: &[JobSpec]) -> BTreeMap<String, u64> {
    let mut pool = BTreeMap::new();
    for job in jobs {
        for (name, units) in &job.resources {
            *pool.entry(name.clone()).or_default() += units;
        }
    }
    pool
}
