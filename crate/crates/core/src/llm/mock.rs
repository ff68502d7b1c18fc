use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

type ReplyFn = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// What a matching rule answers.
pub enum MockReply {
    Fixed(String),
    /// Answers in turn, wrapping around.
    Cycle(Vec<String>, AtomicUsize),
    /// Computed from the prompt. Pure functions keep runs reproducible
    /// regardless of call order.
    Func(ReplyFn),
}

impl MockReply {
    pub fn fixed(text: impl Into<String>) -> Self {
        MockReply::Fixed(text.into())
    }

    pub fn cycle<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Self {
        MockReply::Cycle(texts.into_iter().map(Into::into).collect(), AtomicUsize::new(0))
    }

    pub fn func(f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        MockReply::Func(Arc::new(f))
    }

    fn answer(&self, prompt: &str) -> Option<String> {
        match self {
            MockReply::Fixed(t) => Some(t.clone()),
            MockReply::Cycle(texts, next) if !texts.is_empty() => {
                let i = next.fetch_add(1, Ordering::Relaxed);
                Some(texts[i % texts.len()].clone())
            }
            MockReply::Cycle(..) => None,
            MockReply::Func(f) => Some(f(prompt)),
        }
    }
}

impl fmt::Debug for MockReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockReply::Fixed(t) => f.debug_tuple("Fixed").field(t).finish(),
            MockReply::Cycle(t, _) => f.debug_tuple("Cycle").field(&t.len()).finish(),
            MockReply::Func(_) => f.write_str("Func"),
        }
    }
}

/// Programmable stand-in for a model: the first rule whose pattern occurs
/// in the prompt answers.
#[derive(Debug, Default)]
pub struct MockResponder {
    rules: Vec<(String, MockReply)>,
    fallback: Option<MockReply>,
}

impl MockResponder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(mut self, pattern: impl Into<String>, reply: MockReply) -> Self {
        self.rules.push((pattern.into(), reply));
        self
    }

    pub fn otherwise(mut self, reply: MockReply) -> Self {
        self.fallback = Some(reply);
        self
    }

    pub fn always(text: impl Into<String>) -> Self {
        Self::new().otherwise(MockReply::fixed(text))
    }

    pub(crate) fn answer(&self, prompt: &str) -> Option<String> {
        self.rules
            .iter()
            .find(|(p, _)| prompt.contains(p.as_str()))
            .map(|(_, r)| r)
            .or(self.fallback.as_ref())
            .and_then(|r| r.answer(prompt))
    }
}
