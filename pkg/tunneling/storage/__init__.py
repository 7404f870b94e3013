from tunneling.storage.load import Loader, OutputKind
