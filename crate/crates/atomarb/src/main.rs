use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ATOMARB_LOG", "info"))
        .format_timestamp(None)
        .init();
    // The scan loop polls the flag after every block and saves its checkpoint.
    if let Err(e) = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst)) {
        log::warn!("no interrupt handler: {e}");
    }
    let code = atomarb::cli::run(std::env::args_os(), &INTERRUPTED);
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
