fn main() {
    // Die quietly when downstream closes the pipe (e.g. `... | head`),
    // like other line-oriented tools, instead of panicking on EPIPE.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(bayesborrow::cli::main());
}
