use std::sync::{Arc, Condvar, Mutex};

use super::{ChatProvider, ChatRequest, EmbeddingProvider, ProviderError};

struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

/// Caps the number of in-flight calls to the wrapped provider.
pub struct Limited<P: ?Sized> {
    inner: Arc<P>,
    permits: Semaphore,
}

impl<P: ?Sized> Limited<P> {
    pub fn new(inner: Arc<P>, max_in_flight: usize) -> Self {
        Limited { inner, permits: Semaphore { available: Mutex::new(max_in_flight.max(1)), freed: Condvar::new() } }
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for Limited<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let _permit = self.permits.acquire();
        self.inner.complete(req)
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for Limited<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let _permit = self.permits.acquire();
        self.inner.embed(text)
    }
}
