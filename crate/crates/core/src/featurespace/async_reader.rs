use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::error::{Error, Result};

/// Consumer end of a single-producer, single-consumer bounded FIFO fed by a
/// background reading thread.
///
/// Items (including errors) arrive in source order. Dropping the reader
/// stops the producer at its next send and joins it.
pub struct AsyncReader<T> {
    rx: Option<Receiver<T>>,
    handle: Option<JoinHandle<()>>,
}

/// Spawns a producer thread that drains `source` into a queue holding at most
/// `queue_capacity` items.
pub fn async_reader<I>(source: I, queue_capacity: usize) -> Result<AsyncReader<I::Item>>
where
    I: IntoIterator + Send + 'static,
    I::Item: Send + 'static,
{
    if queue_capacity == 0 {
        return Err(Error::Parameter("queue capacity must be at least 1".into()));
    }
    let (tx, rx) = sync_channel(queue_capacity);
    let handle = std::thread::Builder::new()
        .name("batch-reader".into())
        .spawn(move || {
            for item in source {
                if tx.send(item).is_err() {
                    // consumer hung up
                    break;
                }
            }
        })
        .map_err(|e| Error::io("<reader thread>", e))?;
    Ok(AsyncReader { rx: Some(rx), handle: Some(handle) })
}

impl<T> Iterator for AsyncReader<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        self.rx.as_ref()?.recv().ok()
    }
}

impl<T> Drop for AsyncReader<T> {
    fn drop(&mut self) {
        drop(self.rx.take());
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Delays every item by a fixed amount, standing in for a slow disk or
/// network source.
pub struct Throttle<I> {
    inner: I,
    delay: Duration,
}

pub fn throttle<I: IntoIterator>(source: I, delay: Duration) -> Throttle<I::IntoIter> {
    Throttle { inner: source.into_iter(), delay }
}

impl<I: Iterator> Iterator for Throttle<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        let item = self.inner.next()?;
        std::thread::sleep(self.delay);
        Some(item)
    }
}
