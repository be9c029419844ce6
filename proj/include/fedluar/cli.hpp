#pragma once

namespace fedluar {

// Entry point behind main(). Subcommands: run, ablate-selection,
// ablate-delta, ablate-drop-vs-recycle, validate. Returns 0 on success, 1
// for flag/config problems, 2 for I/O failures, 3 for internal errors.
int cli_main(int argc, const char* const* argv);

}  // namespace fedluar
