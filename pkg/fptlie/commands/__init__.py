# Commands package (one module per CLI subcommand)
