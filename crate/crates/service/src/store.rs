//! File-backed session store.
//!
//! Each user owns one append-only JSON-lines log under `users/<user>.jsonl`.
//! Every state change is an [`Event`]; the in-memory records are whatever
//! replaying the log in order produces. Compaction rewrites a log as the
//! shortest event sequence that replays to the same records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use gazereader::gaze::{condition, write_trace};
use gazereader::knowledge::normalize_word;
use gazereader::pipeline::WordScore;
use gazereader::{AlignConfig, DocumentLayout, GazeSample, GazeTrace};
use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Closed,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub user_id: String,
    pub doc_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    /// Raw trace file, relative to the data directory.
    pub raw_trace: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditioned_trace: Option<String>,
    pub marked_words: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_words: Option<Vec<WordScore>>,
    pub status: Status,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub user_id: String,
    pub word: String,
    pub first_seen: String,
    pub times_flagged: u32,
    pub dismissed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created { session_id: String, user_id: String, created_at: u64, doc: DocumentLayout },
    Gaze { session_id: String, samples: Vec<GazeSample> },
    Marks { session_id: String, words: Vec<usize> },
    Closed { session_id: String },
    Scored { session_id: String, conditioned_trace: String, predictions: Vec<WordScore> },
    Dismissed { word: String },
}

#[derive(Debug, Clone, PartialEq)]
struct Session {
    record: SessionRecord,
    doc: DocumentLayout,
    samples: Vec<GazeSample>,
    /// Position among the user's scored sessions.
    scored_seq: Option<usize>,
}

/// Everything a user owns, guarded together so one lock orders the log.
#[derive(Debug, Default)]
struct UserState {
    sessions: BTreeMap<String, Session>,
    vocab: BTreeMap<String, VocabEntry>,
    log: Option<File>,
    events: usize,
    scored: usize,
}

impl UserState {
    fn session(&self, id: &str) -> ServiceResult<&Session> {
        self.sessions.get(id).ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))
    }

    fn open_session(&self, id: &str) -> ServiceResult<&Session> {
        let s = self.session(id)?;
        if s.record.status != Status::Open {
            return Err(ServiceError::Conflict(format!("session {id} is {:?}, not open", s.record.status)));
        }
        Ok(s)
    }

    /// Whether `ev` is a legal next event.
    fn check(&self, user_id: &str, ev: &Event) -> ServiceResult<()> {
        match ev {
            Event::Created { session_id, .. } => {
                if self.sessions.contains_key(session_id) {
                    return Err(ServiceError::Conflict(format!("session {session_id} already exists")));
                }
            }
            Event::Gaze { session_id, samples } => check_batch(self.open_session(session_id)?.samples.last(), samples)?,
            Event::Marks { session_id, words } => {
                let n = self.open_session(session_id)?.doc.words.len();
                if let Some(&w) = words.iter().find(|&&w| w >= n) {
                    return Err(ServiceError::BadRequest(format!("word {w} outside document of {n} words")));
                }
            }
            Event::Closed { session_id } => {
                self.open_session(session_id)?;
            }
            Event::Scored { session_id, .. } => {
                if self.session(session_id)?.record.status != Status::Closed {
                    return Err(ServiceError::Conflict(format!("session {session_id} is not awaiting scoring")));
                }
            }
            Event::Dismissed { word } => {
                if !self.vocab.contains_key(word) {
                    return Err(ServiceError::NotFound(format!("word {word:?} is not in the vocabulary of {user_id}")));
                }
            }
        }
        Ok(())
    }

    /// Applies an event that passed [`UserState::check`].
    fn apply(&mut self, user_id: &str, ev: &Event) {
        match ev {
            Event::Created { session_id, user_id: owner, created_at, doc } => {
                let record = SessionRecord {
                    session_id: session_id.clone(),
                    user_id: owner.clone(),
                    doc_id: doc.doc_id.clone(),
                    created_at: *created_at,
                    raw_trace: raw_trace_ref(session_id),
                    conditioned_trace: None,
                    marked_words: BTreeSet::new(),
                    predicted_words: None,
                    status: Status::Open,
                    n_samples: 0,
                };
                let session = Session { record, doc: doc.clone(), samples: Vec::new(), scored_seq: None };
                self.sessions.insert(session_id.clone(), session);
            }
            Event::Gaze { session_id, samples } => {
                let s = self.session_mut(session_id);
                s.samples.extend_from_slice(samples);
                s.record.n_samples = s.samples.len();
            }
            Event::Marks { session_id, words } => self.session_mut(session_id).record.marked_words.extend(words),
            Event::Closed { session_id } => self.session_mut(session_id).record.status = Status::Closed,
            Event::Scored { session_id, conditioned_trace, predictions } => {
                let seq = self.scored;
                self.scored += 1;
                let s = self.session_mut(session_id);
                s.record.status = Status::Scored;
                s.record.conditioned_trace = Some(conditioned_trace.clone());
                s.record.predicted_words = Some(predictions.clone());
                s.scored_seq = Some(seq);
                let words: BTreeSet<String> = predictions.iter().map(|p| normalize_word(&p.text)).filter(|w| !w.is_empty()).collect();
                for word in words {
                    self.vocab
                        .entry(word.clone())
                        .and_modify(|e| e.times_flagged += 1)
                        .or_insert_with(|| VocabEntry {
                            user_id: user_id.to_string(),
                            word,
                            first_seen: session_id.clone(),
                            times_flagged: 1,
                            dismissed: false,
                        });
                }
            }
            Event::Dismissed { word } => {
                if let Some(e) = self.vocab.get_mut(word) {
                    e.dismissed = true;
                }
            }
        }
        self.events += 1;
    }

    fn session_mut(&mut self, id: &str) -> &mut Session {
        self.sessions.get_mut(id).expect("event checked against an existing session")
    }

    /// Validates `ev`, then persists and applies it.
    fn commit(&mut self, user_id: &str, ev: Event) -> ServiceResult<()> {
        self.check(user_id, &ev)?;
        let log = self.log.as_mut().ok_or_else(|| ServiceError::Internal("user log is not open".into()))?;
        let mut line = serde_json::to_vec(&ev).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push(b'\n');
        log.write_all(&line)?;
        log.flush()?;
        self.apply(user_id, &ev);
        Ok(())
    }

    /// Sessions in creation order collapse to one event per kind; scoring
    /// events keep their original order so first sightings are preserved.
    fn compacted_events(&self, user_id: &str) -> Vec<Event> {
        let mut out = Vec::new();
        let mut by_time: Vec<&Session> = self.sessions.values().collect();
        by_time.sort_by(|a, b| (a.record.created_at, &a.record.session_id).cmp(&(b.record.created_at, &b.record.session_id)));
        for s in &by_time {
            let id = s.record.session_id.clone();
            out.push(Event::Created { session_id: id.clone(), user_id: user_id.to_string(), created_at: s.record.created_at, doc: s.doc.clone() });
            if !s.samples.is_empty() {
                out.push(Event::Gaze { session_id: id.clone(), samples: s.samples.clone() });
            }
            if !s.record.marked_words.is_empty() {
                out.push(Event::Marks { session_id: id.clone(), words: s.record.marked_words.iter().copied().collect() });
            }
            if s.record.status != Status::Open {
                out.push(Event::Closed { session_id: id });
            }
        }
        let mut scored: Vec<&Session> = by_time.into_iter().filter(|s| s.scored_seq.is_some()).collect();
        scored.sort_by_key(|s| s.scored_seq);
        for s in scored {
            out.push(Event::Scored {
                session_id: s.record.session_id.clone(),
                conditioned_trace: s.record.conditioned_trace.clone().unwrap_or_default(),
                predictions: s.record.predicted_words.clone().unwrap_or_default(),
            });
        }
        for e in self.vocab.values().filter(|e| e.dismissed) {
            out.push(Event::Dismissed { word: e.word.clone() });
        }
        out
    }
}

fn check_batch(last: Option<&GazeSample>, batch: &[GazeSample]) -> ServiceResult<()> {
    let mut prev = last.map(|s| s.t);
    for (i, s) in batch.iter().enumerate() {
        if !(s.t.is_finite() && s.t >= 0.0 && s.x.is_finite() && s.y.is_finite()) {
            return Err(ServiceError::BadRequest(format!("sample {i} is not finite")));
        }
        if prev.is_some_and(|p| s.t <= p) {
            return Err(ServiceError::Conflict(format!("sample {i} at t={} does not follow t={}", s.t, prev.unwrap_or_default())));
        }
        prev = Some(s.t);
    }
    Ok(())
}

fn raw_trace_ref(session_id: &str) -> String {
    format!("traces/{session_id}.raw.jsonl")
}

fn conditioned_trace_ref(session_id: &str) -> String {
    format!("traces/{session_id}.conditioned.jsonl")
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Inputs needed to score a closed session outside the store lock.
#[derive(Debug, Clone)]
pub struct ScoringJob {
    pub session_id: String,
    pub user_id: String,
    pub doc: DocumentLayout,
    pub trace: GazeTrace,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    users: RwLock<HashMap<String, Arc<Mutex<UserState>>>>,
    owners: RwLock<HashMap<String, String>>,
}

impl Store {
    /// Opens `dir`, replaying every user log found under `users/`.
    pub fn open(dir: &Path) -> ServiceResult<Store> {
        fs::create_dir_all(dir.join("users"))?;
        fs::create_dir_all(dir.join("traces"))?;
        let store = Store { dir: dir.to_path_buf(), users: RwLock::default(), owners: RwLock::default() };
        let mut logs: Vec<PathBuf> = fs::read_dir(dir.join("users"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for path in logs {
            let Some(user) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            let state = replay(&user, &path)?;
            let mut owners = store.owners.write().expect("owner index poisoned");
            for id in state.sessions.keys() {
                owners.insert(id.clone(), user.clone());
            }
            drop(owners);
            let mut state = state;
            state.log = Some(OpenOptions::new().append(true).open(&path)?);
            store.users.write().expect("user index poisoned").insert(user, Arc::new(Mutex::new(state)));
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self, user: &str) -> PathBuf {
        self.dir.join("users").join(format!("{user}.jsonl"))
    }

    fn user(&self, user: &str) -> ServiceResult<Arc<Mutex<UserState>>> {
        if let Some(u) = self.users.read().expect("user index poisoned").get(user) {
            return Ok(u.clone());
        }
        let mut users = self.users.write().expect("user index poisoned");
        if let Some(u) = users.get(user) {
            return Ok(u.clone());
        }
        let log = OpenOptions::new().create(true).append(true).open(self.log_path(user))?;
        let state = Arc::new(Mutex::new(UserState { log: Some(log), ..UserState::default() }));
        users.insert(user.to_string(), state.clone());
        Ok(state)
    }

    fn owner(&self, session_id: &str) -> ServiceResult<Arc<Mutex<UserState>>> {
        let owner = self
            .owners
            .read()
            .expect("owner index poisoned")
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session {session_id}")))?;
        self.user(&owner)
    }

    fn with_session<T>(&self, session_id: &str, f: impl FnOnce(&str, &mut UserState) -> ServiceResult<T>) -> ServiceResult<T> {
        let user = self.owner(session_id)?;
        let mut guard = lock(&user);
        let user_id = guard
            .sessions
            .get(session_id)
            .map(|s| s.record.user_id.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("no session {session_id}")))?;
        f(&user_id, &mut guard)
    }

    pub fn create_session(&self, user_id: &str, doc: DocumentLayout) -> ServiceResult<SessionRecord> {
        if !valid_id(user_id) {
            return Err(ServiceError::BadRequest(format!("user id {user_id:?} must be 1-64 characters of [A-Za-z0-9_-]")));
        }
        doc.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if doc.words.is_empty() {
            return Err(ServiceError::BadRequest("document has no words".into()));
        }
        let session_id = uuid::Uuid::new_v4().simple().to_string();
        let user = self.user(user_id)?;
        let mut guard = lock(&user);
        guard.commit(user_id, Event::Created { session_id: session_id.clone(), user_id: user_id.to_string(), created_at: now_ms(), doc })?;
        self.owners.write().expect("owner index poisoned").insert(session_id.clone(), user_id.to_string());
        Ok(guard.sessions[&session_id].record.clone())
    }

    /// Appends a batch atomically; returns the number of samples accepted.
    pub fn append_gaze(&self, session_id: &str, samples: Vec<GazeSample>) -> ServiceResult<usize> {
        let n = samples.len();
        if n == 0 {
            return Ok(0);
        }
        self.with_session(session_id, |user, st| st.commit(user, Event::Gaze { session_id: session_id.to_string(), samples }))?;
        Ok(n)
    }

    pub fn mark_words(&self, session_id: &str, words: Vec<usize>) -> ServiceResult<SessionRecord> {
        self.with_session(session_id, |user, st| {
            if !words.is_empty() {
                st.commit(user, Event::Marks { session_id: session_id.to_string(), words })?;
            }
            Ok(st.sessions[session_id].record.clone())
        })
    }

    /// Moves an open session to closed and returns what scoring needs. A
    /// session that is already closed yields the same job again; a scored
    /// session yields `None`.
    pub fn close(&self, session_id: &str) -> ServiceResult<Option<ScoringJob>> {
        self.with_session(session_id, |user, st| {
            let s = &st.sessions[session_id];
            match s.record.status {
                Status::Scored => return Ok(None),
                Status::Open if s.samples.len() < 2 => {
                    return Err(ServiceError::Unprocessable(format!(
                        "session {session_id} has {} gaze samples; at least 2 are needed",
                        s.samples.len()
                    )))
                }
                Status::Open => {
                    let trace = GazeTrace::new(session_id, s.samples.clone()).map_err(|e| ServiceError::Internal(e.to_string()))?;
                    write_trace(&self.dir.join(raw_trace_ref(session_id)), &trace)?;
                    st.commit(user, Event::Closed { session_id: session_id.to_string() })?;
                }
                Status::Closed => {}
            }
            let s = &st.sessions[session_id];
            Ok(Some(ScoringJob {
                session_id: session_id.to_string(),
                user_id: user.to_string(),
                doc: s.doc.clone(),
                trace: GazeTrace::new(session_id, s.samples.clone()).map_err(|e| ServiceError::Internal(e.to_string()))?,
            }))
        })
    }

    /// Persists predictions for a closed session. Writing the conditioned
    /// trace is part of the transition.
    pub fn record_scores(&self, job: &ScoringJob, align: &AlignConfig, predictions: Vec<WordScore>) -> ServiceResult<SessionRecord> {
        self.with_session(&job.session_id, |user, st| {
            if st.sessions[&job.session_id].record.status == Status::Scored {
                return Ok(st.sessions[&job.session_id].record.clone());
            }
            let conditioned = condition(&job.trace, align.smooth_window, align.rate_hz).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
            let r = conditioned_trace_ref(&job.session_id);
            write_trace(&self.dir.join(&r), &conditioned)?;
            st.commit(user, Event::Scored { session_id: job.session_id.clone(), conditioned_trace: r, predictions })?;
            Ok(st.sessions[&job.session_id].record.clone())
        })
    }

    pub fn session(&self, session_id: &str) -> ServiceResult<SessionRecord> {
        self.with_session(session_id, |_, st| Ok(st.sessions[session_id].record.clone()))
    }

    /// Scored sessions in order of creation, for one user.
    pub fn sessions(&self, user_id: &str) -> Vec<SessionRecord> {
        let Some(user) = self.users.read().expect("user index poisoned").get(user_id).cloned() else {
            return Vec::new();
        };
        let guard = lock(&user);
        let mut out: Vec<SessionRecord> = guard.sessions.values().map(|s| s.record.clone()).collect();
        out.sort_by(|a, b| (a.created_at, &a.session_id).cmp(&(b.created_at, &b.session_id)));
        out
    }

    /// Non-dismissed entries, most flagged first.
    pub fn vocab(&self, user_id: &str) -> Vec<VocabEntry> {
        let Some(user) = self.users.read().expect("user index poisoned").get(user_id).cloned() else {
            return Vec::new();
        };
        let guard = lock(&user);
        let mut out: Vec<VocabEntry> = guard.vocab.values().filter(|e| !e.dismissed).cloned().collect();
        out.sort_by(|a, b| b.times_flagged.cmp(&a.times_flagged).then_with(|| a.word.cmp(&b.word)));
        out
    }

    pub fn dismiss(&self, user_id: &str, word: &str) -> ServiceResult<()> {
        let user = self
            .users
            .read()
            .expect("user index poisoned")
            .get(user_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no user {user_id}")))?;
        let mut guard = lock(&user);
        let word = normalize_word(word);
        if guard.vocab.get(&word).is_some_and(|e| e.dismissed) {
            return Ok(());
        }
        guard.commit(user_id, Event::Dismissed { word })
    }

    /// Rewrites every user log in compacted form.
    pub fn compact(&self) -> ServiceResult<()> {
        let users: Vec<(String, Arc<Mutex<UserState>>)> =
            self.users.read().expect("user index poisoned").iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (user_id, user) in users {
            let mut guard = lock(&user);
            let events = guard.compacted_events(&user_id);
            let path = self.log_path(&user_id);
            let tmp = path.with_extension("jsonl.tmp");
            {
                let mut f = File::create(&tmp)?;
                for ev in &events {
                    let mut line = serde_json::to_vec(ev).map_err(|e| ServiceError::Internal(e.to_string()))?;
                    line.push(b'\n');
                    f.write_all(&line)?;
                }
                f.sync_all()?;
            }
            fs::rename(&tmp, &path)?;
            guard.log = Some(OpenOptions::new().append(true).open(&path)?);
            guard.events = events.len();
        }
        Ok(())
    }

    /// Number of events in the user's log.
    pub fn log_len(&self, user_id: &str) -> usize {
        self.users.read().expect("user index poisoned").get(user_id).map(|u| lock(u).events).unwrap_or(0)
    }
}

fn lock(user: &Mutex<UserState>) -> MutexGuard<'_, UserState> {
    user.lock().unwrap_or_else(|e| e.into_inner())
}

/// Rebuilds a user's state from its log. A torn final line (no trailing
/// newline) is cut off so later appends start on a fresh line.
fn replay(user_id: &str, path: &Path) -> ServiceResult<UserState> {
    let mut state = UserState::default();
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let (mut lineno, mut good) = (0, 0u64);
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            log::warn!("{}: dropping torn final line {lineno}", path.display());
            OpenOptions::new().write(true).open(path)?.set_len(good)?;
            break;
        }
        good += n as u64;
        if line.trim().is_empty() {
            continue;
        }
        let ev: Event = serde_json::from_str(line.trim_end()).map_err(|e| ServiceError::Internal(format!("{}:{lineno}: {e}", path.display())))?;
        state
            .check(user_id, &ev)
            .map_err(|e| ServiceError::Internal(format!("{}:{lineno}: replay failed: {e}", path.display())))?;
        state.apply(user_id, &ev);
    }
    Ok(state)
}
