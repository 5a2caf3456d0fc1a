use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use ardent_core::rng::{seeded, SimRng};
use ardent_core::{FilterConfig, ParticleSet};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{LoadedBundle, TaskBundle};
use crate::error::{Result, ServiceError};
use crate::session::{Arm, Event, Session, SessionParams, ARMS};

#[derive(Clone, Debug, Default)]
pub struct ServiceConfig {
    /// Seeds arm assignment, session ids and session seeds.
    pub seed: u64,
    pub filter: FilterConfig,
    /// Directory for per-session JSONL logs; `None` keeps logs in memory only.
    pub log_dir: Option<PathBuf>,
    /// Initial particles for Ardent sessions instead of the prior.
    pub warm_start: Option<ParticleSet>,
}

/// Arm requested at session creation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmRequest {
    #[default]
    Auto,
    Ardent,
    Random,
    Favourite,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub bundle: Option<String>,
    #[serde(default)]
    pub arm: ArmRequest,
    /// The participant's favourite explainer, asked before allocation.
    #[serde(default)]
    pub favourite: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub arm: Arm,
}

struct Entry {
    session: Session,
    sink: Option<File>,
    written: usize,
}

impl Entry {
    /// Appends unwritten events to the JSONL file and syncs it.
    fn flush(&mut self) -> Result<()> {
        let Some(file) = &mut self.sink else {
            return Ok(());
        };
        let events = &self.session.events()[self.written..];
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for e in events {
            serde_json::to_writer(&mut buf, e)?;
            buf.push(b'\n');
        }
        file.write_all(&buf)?;
        file.sync_data()?;
        self.written += events.len();
        Ok(())
    }
}

/// All live sessions. Each session sits behind its own lock, so operations
/// on one session are serialized while different sessions run in parallel.
pub struct SessionStore {
    bundles: BTreeMap<String, LoadedBundleArc>,
    default_bundle: String,
    config: ServiceConfig,
    rng: Mutex<SimRng>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

#[derive(Clone)]
struct LoadedBundleArc {
    bundle: Arc<TaskBundle>,
    root: Option<PathBuf>,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl SessionStore {
    /// Store over bundles loaded from disk. The first bundle is the default.
    pub fn new(bundles: Vec<LoadedBundle>, config: ServiceConfig) -> Result<Self> {
        let entries = bundles
            .into_iter()
            .map(|b| {
                (
                    b.bundle.id.clone(),
                    LoadedBundleArc {
                        bundle: Arc::new(b.bundle),
                        root: Some(b.root),
                    },
                )
            })
            .collect::<Vec<_>>();
        Self::build(entries, config)
    }

    /// Store over in-memory bundles without asset directories.
    pub fn in_memory(bundles: Vec<TaskBundle>, config: ServiceConfig) -> Result<Self> {
        let entries = bundles
            .into_iter()
            .map(|b| {
                (
                    b.id.clone(),
                    LoadedBundleArc {
                        bundle: Arc::new(b),
                        root: None,
                    },
                )
            })
            .collect::<Vec<_>>();
        Self::build(entries, config)
    }

    fn build(entries: Vec<(String, LoadedBundleArc)>, config: ServiceConfig) -> Result<Self> {
        let Some(default_bundle) = entries.first().map(|(id, _)| id.clone()) else {
            return Err(ServiceError::InvalidBundle("no bundles".into()));
        };
        let mut bundles = BTreeMap::new();
        for (id, b) in entries {
            b.bundle.validate()?;
            if bundles.insert(id.clone(), b).is_some() {
                return Err(ServiceError::InvalidBundle(format!("duplicate bundle id {id:?}")));
            }
        }
        config.filter.validate()?;
        if let Some(dir) = &config.log_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(SessionStore {
            bundles,
            default_bundle,
            rng: Mutex::new(seeded(config.seed, 2)),
            config,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn bundle(&self, id: &str) -> Option<Arc<TaskBundle>> {
        self.bundles.get(id).map(|b| b.bundle.clone())
    }

    /// `(bundle id, asset directory)` for bundles loaded from disk.
    pub fn asset_roots(&self) -> Vec<(String, PathBuf)> {
        self.bundles
            .iter()
            .filter_map(|(id, b)| b.root.clone().map(|r| (id.clone(), r)))
            .collect()
    }

    pub fn log_path(&self, session_id: &str) -> Option<PathBuf> {
        self.config.log_dir.as_ref().map(|d| d.join(format!("{session_id}.jsonl")))
    }

    pub fn create(&self, req: CreateRequest) -> Result<Created> {
        let bundle_id = req.bundle.as_deref().unwrap_or(&self.default_bundle);
        let bundle = self
            .bundle(bundle_id)
            .ok_or_else(|| ServiceError::NotFound(format!("bundle {bundle_id:?}")))?;
        if req.arm == ArmRequest::Auto && req.favourite.is_none() {
            return Err(ServiceError::InvalidRequest(
                "auto-assignment needs the participant's favourite explainer".into(),
            ));
        }
        let (arm, seed, id) = {
            let mut rng = self.rng.lock().expect("rng lock");
            let arm = match req.arm {
                ArmRequest::Auto => ARMS[rng.random_range(0..ARMS.len())],
                ArmRequest::Ardent => Arm::Ardent,
                ArmRequest::Random => Arm::Random,
                ArmRequest::Favourite => Arm::Favourite,
            };
            let seed = req.seed.unwrap_or_else(|| rng.random());
            let id = uuid::Builder::from_random_bytes(rng.random()).into_uuid().simple().to_string();
            (arm, seed, id)
        };
        let params = SessionParams {
            arm,
            favourite: req.favourite,
            seed,
            filter: self.config.filter.clone(),
            warm_start: self.config.warm_start.clone(),
        };
        let session = Session::create(id.clone(), bundle, params, now_ms())?;
        let sink = match self.log_path(&id) {
            Some(p) => Some(File::options().create_new(true).append(true).open(p)?),
            None => None,
        };
        let mut entry = Entry {
            session,
            sink,
            written: 0,
        };
        entry.flush()?;
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(entry)));
        Ok(Created { session_id: id, arm })
    }

    /// Runs `f` on the session with exclusive access and persists any new
    /// events before returning.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<T>) -> Result<T> {
        let entry = self
            .sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {id:?}")))?;
        let mut entry = entry.lock().expect("session lock");
        let out = f(&mut entry.session);
        entry.flush()?;
        out
    }

    pub fn export_log(&self, id: &str) -> Result<Vec<Event>> {
        self.with_session(id, |s| Ok(s.events().to_vec()))
    }

    /// Rebuilds a session from an exported log against this store's bundles.
    pub fn replay(&self, events: &[Event]) -> Result<Session> {
        let bundle_id = match events.first().map(|e| &e.body) {
            Some(crate::session::EventBody::SessionCreated { bundle_id, .. }) => bundle_id.clone(),
            _ => {
                return Err(ServiceError::ReplayMismatch {
                    index: 0,
                    reason: "log does not start with session creation".into(),
                })
            }
        };
        let bundle = self
            .bundle(&bundle_id)
            .ok_or_else(|| ServiceError::NotFound(format!("bundle {bundle_id:?}")))?;
        Session::replay(bundle, events, self.config.warm_start.clone())
    }
}

/// Reads a JSONL event log written by the store.
pub fn read_log(path: &Path) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
