#pragma once

// Placeholder during scaffolding; filled in with the subcommands.
namespace treepool {
inline int cli_main(int, char**) { return 0; }
}  // namespace treepool
