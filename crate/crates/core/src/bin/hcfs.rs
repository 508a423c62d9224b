fn main() { std::process::exit(hcfs::cli::main_with_args(std::env::args_os())); }
