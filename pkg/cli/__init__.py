# Command line package initialization