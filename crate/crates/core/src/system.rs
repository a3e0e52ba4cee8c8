//! The transition-system abstraction shared by programs, machines and protocols.
//!
//! Configurations are handled in an encoded form: a short slice of `u16`
//! words whose layout is private to each system. Each level also offers a
//! typed configuration type that converts to and from this encoding.

use serde::{Deserialize, Serialize};

pub type Word = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    False,
    True,
    Undefined,
}

impl Output {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Output::True
        } else {
            Output::False
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Output::True => Some(true),
            Output::False => Some(false),
            Output::Undefined => None,
        }
    }
}

/// A left-total transition relation with an output function.
pub trait TransitionSystem: Sync {
    /// Appends every one-step successor of `config` to `out`. Must push at
    /// least one configuration.
    fn successors(&self, config: &[Word], out: &mut Successors);

    fn output(&self, config: &[Word]) -> Output;

    /// Human-readable rendering for reports.
    fn describe(&self, config: &[Word]) -> String;

    /// Structural checks on a configuration and its successor set.
    fn check_step(&self, _config: &[Word], _succs: &Successors) -> Result<(), String> {
        Ok(())
    }
}

/// A flat buffer of encoded configurations.
#[derive(Debug, Default, Clone)]
pub struct Successors {
    data: Vec<Word>,
    ends: Vec<usize>,
}

impl Successors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.data.clear();
        self.ends.clear();
    }

    pub fn push(&mut self, config: &[Word]) {
        self.data.extend_from_slice(config);
        self.ends.push(self.data.len());
    }

    /// Pushes `base` and lets `edit` modify the copy in place.
    pub fn push_edit(&mut self, base: &[Word], edit: impl FnOnce(&mut [Word])) {
        let start = self.data.len();
        self.data.extend_from_slice(base);
        edit(&mut self.data[start..]);
        self.ends.push(self.data.len());
    }

    /// Pushes a configuration built by appending words to the buffer.
    pub fn push_with(&mut self, build: impl FnOnce(&mut Vec<Word>)) {
        build(&mut self.data);
        self.ends.push(self.data.len());
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn get(&self, i: usize) -> &[Word] {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        &self.data[start..self.ends[i]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Word]> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn contains(&self, config: &[Word]) -> bool {
        self.iter().any(|c| c == config)
    }
}

/// Converts a count to a configuration word, failing on overflow.
pub(crate) fn word(v: u64) -> crate::Result<Word> {
    Word::try_from(v).map_err(|_| crate::Error::Bound(format!("value {v} does not fit a configuration word")))
}
