//! Sessions, their writer locks and the on-disk event logs.
//!
//! Layout under the data directory:
//! `sessions/<id>/events.ndjson` (append-only) and
//! `sessions/<id>/snapshot.json` (rewritten after every write).

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use forecrew::model::PlanDocument;
use forecrew::narrative::Extractor;
use forecrew::twin::{InterventionReport, LoggedEvent, TwinError, TwinEvent, TwinSnapshot, TwinState};
use forecrew::SolveLimits;
use indexmap::IndexMap;
use tokio::sync::watch;

/// What readers see: replaced wholesale after each write, never mutated.
#[derive(Debug, Clone)]
pub struct SessionView {
    pub snapshot: TwinSnapshot,
    pub plans: Vec<PlanDocument>,
    pub events: Vec<LoggedEvent>,
}

struct Writer {
    twin: TwinState,
    persisted: usize,
    plans: Vec<PlanDocument>,
}

pub struct Session {
    pub id: String,
    dir: Option<PathBuf>,
    writer: Mutex<Writer>,
    view: RwLock<Arc<SessionView>>,
    changed: watch::Sender<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
}

fn plan_history(events: &[LoggedEvent]) -> Vec<PlanDocument> {
    events
        .iter()
        .filter_map(|e| match &e.event {
            TwinEvent::Genesis { plan, .. } | TwinEvent::Replanned { plan, .. } => Some(plan.clone()),
            _ => None,
        })
        .collect()
}

impl Session {
    fn new(id: String, dir: Option<PathBuf>, twin: TwinState, persisted: usize) -> Result<Self, StoreError> {
        let plans = plan_history(&twin.events[..persisted]);
        let view = SessionView { snapshot: twin.snapshot(), plans: plans.clone(), events: twin.events.clone() };
        let (changed, _) = watch::channel(twin.events.len());
        let session = Self {
            id,
            dir,
            writer: Mutex::new(Writer { twin, persisted, plans }),
            view: RwLock::new(Arc::new(view)),
            changed,
        };
        {
            let mut w = session.writer.lock().expect("fresh lock");
            session.persist(&mut w)?;
        }
        Ok(session)
    }

    pub fn view(&self) -> Arc<SessionView> {
        self.view.read().expect("view lock").clone()
    }

    /// Watches the number of logged events.
    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.changed.subscribe()
    }

    pub fn advance(&self, to: i64) -> Result<TwinSnapshot, StoreError> {
        self.write(|twin| twin.advance(to))?;
        Ok(self.view().snapshot.clone())
    }

    pub fn intervene(
        &self,
        narrative: &str,
        extractor: &Extractor,
        limits: &SolveLimits,
    ) -> Result<InterventionReport, StoreError> {
        self.write(|twin| twin.intervene(narrative, extractor, limits))
    }

    /// Runs one transition under the writer lock. Events logged by the
    /// transition are persisted even when it fails, so failed
    /// interventions stay on record.
    fn write<T>(&self, op: impl FnOnce(&mut TwinState) -> Result<T, TwinError>) -> Result<T, StoreError> {
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let result = op(&mut w.twin);
        self.persist(&mut w)?;
        Ok(result?)
    }

    fn persist(&self, w: &mut Writer) -> Result<(), StoreError> {
        let fresh = &w.twin.events[w.persisted..];
        if fresh.is_empty() {
            return Ok(());
        }
        w.plans.extend(plan_history(fresh));
        if let Some(dir) = &self.dir {
            let mut log = OpenOptions::new().create(true).append(true).open(dir.join("events.ndjson"))?;
            let mut text = String::new();
            for event in fresh {
                text.push_str(&serde_json::to_string(event).expect("event serializes"));
                text.push('\n');
            }
            log.write_all(text.as_bytes())?;
            log.sync_data()?;
            let snapshot = serde_json::to_vec_pretty(&w.twin.snapshot()).expect("snapshot serializes");
            let tmp = dir.join("snapshot.json.tmp");
            fs::write(&tmp, snapshot)?;
            fs::rename(tmp, dir.join("snapshot.json"))?;
        }
        w.persisted = w.twin.events.len();
        let view = SessionView { snapshot: w.twin.snapshot(), plans: w.plans.clone(), events: w.twin.events.clone() };
        *self.view.write().expect("view lock") = Arc::new(view);
        self.changed.send_replace(w.persisted);
        Ok(())
    }
}

/// All sessions, optionally backed by a data directory.
pub struct SessionStore {
    root: Option<PathBuf>,
    sessions: RwLock<IndexMap<String, Arc<Session>>>,
    next: AtomicU64,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self { root: None, sessions: RwLock::new(IndexMap::new()), next: AtomicU64::new(1) }
    }

    /// Opens `root`, replaying every persisted session log.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        let base = root.join("sessions");
        fs::create_dir_all(&base)?;
        let mut sessions = IndexMap::new();
        let mut highest = 0;
        let mut dirs: Vec<_> = fs::read_dir(&base)?.filter_map(Result::ok).map(|e| e.path()).collect();
        dirs.sort();
        for dir in dirs {
            let log = dir.join("events.ndjson");
            let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else { continue };
            if !log.is_file() {
                continue;
            }
            let events = TwinState::parse_ndjson(&fs::read_to_string(&log)?)?;
            let twin = TwinState::replay(&events)?;
            if let Ok(text) = fs::read_to_string(dir.join("snapshot.json")) {
                let stored: Result<TwinSnapshot, _> = serde_json::from_str(&text);
                if stored.as_ref().ok() != Some(&twin.snapshot()) {
                    tracing::warn!(session = %id, "stored snapshot differs from the replayed log; using the log");
                }
            }
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                highest = highest.max(n);
            }
            let persisted = twin.events.len();
            sessions.insert(id.clone(), Arc::new(Session::new(id, Some(dir), twin, persisted)?));
        }
        Ok(Self { root: Some(root.to_path_buf()), sessions: RwLock::new(sessions), next: AtomicU64::new(highest + 1) })
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("store lock").keys().cloned().collect()
    }

    /// Registers a twin under a fresh id and writes its log.
    pub fn insert(&self, twin: TwinState) -> Result<Arc<Session>, StoreError> {
        let id = format!("s{}", self.next.fetch_add(1, Ordering::SeqCst));
        let dir = match &self.root {
            Some(root) => {
                let dir = root.join("sessions").join(&id);
                fs::create_dir_all(&dir)?;
                Some(dir)
            }
            None => None,
        };
        let session = Arc::new(Session::new(id.clone(), dir, twin, 0)?);
        self.sessions.write().expect("store lock").insert(id, session.clone());
        Ok(session)
    }
}
