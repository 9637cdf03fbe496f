from bfreg.main import main

main()
