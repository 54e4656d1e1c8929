from viewsel.cli import run_main

run_main()
