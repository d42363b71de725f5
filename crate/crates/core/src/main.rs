use clap::Parser;

use fleetline::cli::Cli;

fn main() {
    // Traces stream to stdout by design; when the reader closes the pipe
    // (`fleetline run … | head`), die quietly like any other stream
    // producer instead of panicking in println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    std::process::exit(cli.run());
}
