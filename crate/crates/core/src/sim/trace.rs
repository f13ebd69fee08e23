//! Line-oriented logs: processed events (`time_us,seq,kind,target`) and
//! cluster role changes (`time_us,node,old_role,new_role,cluster_id`).

use std::io::{self, Write};

use super::time::SimTime;
use crate::ids::NodeId;

/// Buffered CSV-ish line writer that defers I/O errors to `finish`.
pub struct LineLog {
    out: Box<dyn Write + Send>,
    error: Option<io::Error>,
}

impl LineLog {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        LineLog { out, error: None }
    }

    pub fn write_line(&mut self, args: std::fmt::Arguments<'_>) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self
            .out
            .write_fmt(args)
            .and_then(|_| self.out.write_all(b"\n"))
        {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> io::Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()
    }
}

pub struct EventTrace(LineLog);

impl EventTrace {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        EventTrace(LineLog::new(out))
    }

    pub fn record(&mut self, time: SimTime, seq: u64, kind: &str, target: Option<NodeId>) {
        match target {
            Some(n) => {
                self.0
                    .write_line(format_args!("{},{},{},{}", time.as_micros(), seq, kind, n))
            }
            None => self
                .0
                .write_line(format_args!("{},{},{},-", time.as_micros(), seq, kind)),
        }
    }

    pub fn finish(self) -> io::Result<()> {
        self.0.finish()
    }
}

/// A `Write` target that appends into a shared buffer; handy for replay tests.
#[derive(Clone, Default)]
pub struct SharedBuffer(std::sync::Arc<std::sync::Mutex<Vec<u8>>>);

impl SharedBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contents(&self) -> Vec<u8> {
        self.0.lock().expect("poisoned").clone()
    }
}

impl Write for SharedBuffer {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().expect("poisoned").extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}
