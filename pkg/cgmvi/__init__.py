from cgmvi.version import __version__
