use std::sync::{Condvar, Mutex};

use super::{ChatProvider, CompletionRequest, LlmError};

/// Bounds the number of requests in flight against the wrapped provider.
pub struct ConcurrencyLimit<P> {
    inner: P,
    max: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

impl<P> ConcurrencyLimit<P> {
    pub fn new(inner: P, max: usize) -> Self {
        Self {
            inner,
            max: max.max(1),
            state: Mutex::new((0, 0)),
            freed: Condvar::new(),
        }
    }

    /// Highest number of simultaneous requests observed.
    pub fn peak(&self) -> usize {
        self.state.lock().map(|s| s.1).unwrap_or(0)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

struct Permit<'a, P>(&'a ConcurrencyLimit<P>);

impl<P> Drop for Permit<'_, P> {
    fn drop(&mut self) {
        if let Ok(mut s) = self.0.state.lock() {
            s.0 -= 1;
        }
        self.0.freed.notify_one();
    }
}

impl<P: ChatProvider> ChatProvider for ConcurrencyLimit<P> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let _permit = {
            let mut s = self.state.lock().expect("limit state poisoned");
            while s.0 >= self.max {
                s = self.freed.wait(s).expect("limit state poisoned");
            }
            s.0 += 1;
            s.1 = s.1.max(s.0);
            Permit(self)
        };
        self.inner.complete(request)
    }
}
