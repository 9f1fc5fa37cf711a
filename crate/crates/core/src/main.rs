fn main() {
    std::process::exit(qpost::cli::main_exit_code());
}
