from qsylv.main import main

main()
