from documint.main import main

main()
