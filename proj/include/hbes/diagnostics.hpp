#pragma once

#include <functional>
#include <string>

namespace hbes {

/// Receives non-fatal warnings (clamped efficiencies, kernel underflow, ...).
/// The default handler writes to stderr; pass an empty function to silence.
using DiagnosticHandler = std::function<void(const std::string&)>;

void set_diagnostic_handler(DiagnosticHandler handler);
void diagnostic(const std::string& message);

}  // namespace hbes
