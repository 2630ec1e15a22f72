fn main() -> std::process::ExitCode {
    egoeval::cli::main_impl()
}
