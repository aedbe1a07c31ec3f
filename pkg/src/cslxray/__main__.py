from cslxray.cli import main

main(prog_name="cslxray")
