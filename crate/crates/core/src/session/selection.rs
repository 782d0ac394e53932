use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

use super::jobs::{JobKind, JobState};
use super::settings::Panel;

/// Brushed observations shared by every view.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SelectionState {
    /// Sorted, distinct 1-based observation ids.
    pub selected: Vec<usize>,
    pub origin_view: String,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SessionEvent {
    Selection(SelectionState),
    Job {
        id: String,
        kind: JobKind,
        panel: Panel,
        state: JobState,
        progress: f64,
    },
}

/// Receiving end of a session's event stream.
#[derive(Debug)]
pub struct Subscription {
    rx: Receiver<SessionEvent>,
}

impl Subscription {
    pub fn recv_timeout(&self, timeout: Duration) -> Option<SessionEvent> {
        match self.rx.recv_timeout(timeout) {
            Ok(e) => Some(e),
            Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => None,
        }
    }

    pub fn try_recv(&self) -> Option<SessionEvent> {
        self.rx.try_recv().ok()
    }

    /// Blocks until the next event; `None` once the session is gone.
    pub fn recv(&self) -> Option<SessionEvent> {
        self.rx.recv().ok()
    }
}

/// Fan-out of session events to every live subscriber.
#[derive(Debug, Default)]
pub struct EventHub {
    subscribers: Mutex<Vec<Sender<SessionEvent>>>,
}

impl EventHub {
    pub fn subscribe(&self) -> Subscription {
        let (tx, rx) = channel();
        self.subscribers.lock().expect("hub lock").push(tx);
        Subscription { rx }
    }

    pub fn publish(&self, event: &SessionEvent) {
        self.subscribers
            .lock()
            .expect("hub lock")
            .retain(|tx| tx.send(event.clone()).is_ok());
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().expect("hub lock").len()
    }
}
