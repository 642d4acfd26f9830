fn main() {
    let code = match caloron::cli::parse_args(std::env::args_os()) {
        Ok(cli) => caloron::cli::execute(cli),
        Err(code) => code,
    };
    std::process::exit(code.code());
}
