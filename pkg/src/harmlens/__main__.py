from harmlens.cli import main

main()
