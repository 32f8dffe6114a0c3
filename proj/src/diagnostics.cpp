#include "hbes/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace hbes {
namespace {

std::mutex g_mutex;
DiagnosticHandler g_handler = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };

}  // namespace

void set_diagnostic_handler(DiagnosticHandler handler) {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_handler = std::move(handler);
}

void diagnostic(const std::string& message) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_handler) g_handler(message);
}

}  // namespace hbes
