from gullypost.cli import main

main()
