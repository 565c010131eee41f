//! Memory measurement: process peak RSS and a per-thread allocation counter.
//!
//! Install [`CountingAlloc`] as the global allocator in a binary to enable
//! [`ThreadMeter`]. Counters are thread-local, so a measurement only sees
//! buffers allocated by the measuring thread.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::sync::atomic::{AtomicBool, Ordering};

thread_local! {
    static LIVE: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
}

static INSTALLED: AtomicBool = AtomicBool::new(false);

/// System allocator wrapper that tracks live and peak heap bytes per thread.
pub struct CountingAlloc;

#[inline]
fn record(delta: isize) {
    let _ = LIVE.try_with(|live| {
        let now = live.get() + delta;
        live.set(now);
        let _ = PEAK.try_with(|peak| {
            if now > peak.get() {
                peak.set(now);
            }
        });
    });
}

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            INSTALLED.store(true, Ordering::Relaxed);
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        record(-(layout.size() as isize));
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            INSTALLED.store(true, Ordering::Relaxed);
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            record(new_size as isize - layout.size() as isize);
        }
        p
    }
}

/// Whether [`CountingAlloc`] is the active global allocator.
pub fn counter_installed() -> bool {
    INSTALLED.load(Ordering::Relaxed)
}

/// Measures the peak of bytes allocated on this thread above the level at
/// which the meter was started.
pub struct ThreadMeter {
    baseline: isize,
}

impl ThreadMeter {
    pub fn start() -> Self {
        let baseline = LIVE.with(Cell::get);
        PEAK.with(|p| p.set(baseline));
        Self { baseline }
    }

    pub fn peak_bytes(&self) -> usize {
        (PEAK.with(Cell::get) - self.baseline).max(0) as usize
    }
}

/// Runs `f` and returns its result with the peak extra heap bytes it held.
/// Reports 0 bytes when the counting allocator is not installed.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let meter = ThreadMeter::start();
    let out = f();
    (out, meter.peak_bytes())
}

/// Peak resident set size of the process in bytes (0 where unsupported).
pub fn peak_rss_bytes() -> u64 {
    #[cfg(unix)]
    {
        let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
        // SAFETY: getrusage writes into the provided struct and returns 0 on success.
        let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) };
        if rc != 0 {
            return 0;
        }
        let usage = unsafe { usage.assume_init() };
        let max = usage.ru_maxrss.max(0) as u64;
        if cfg!(target_os = "macos") {
            max
        } else {
            max * 1024
        }
    }
    #[cfg(not(unix))]
    {
        0
    }
}
