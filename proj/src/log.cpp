#include "dsc/log.hpp"

#include <iostream>
#include <mutex>

namespace dsc::log {
namespace {

std::mutex g_mutex;
Handler g_handler;

}  // namespace

Handler set_warning_handler(Handler handler) {
    std::lock_guard lock(g_mutex);
    std::swap(g_handler, handler);
    return handler;
}

void warn(std::string_view message) {
    std::lock_guard lock(g_mutex);
    if (g_handler) {
        g_handler(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningCapture::WarningCapture() {
    previous_ = set_warning_handler([this](std::string_view m) { messages_.emplace_back(m); });
}

WarningCapture::~WarningCapture() { set_warning_handler(std::move(previous_)); }

bool WarningCapture::contains(std::string_view needle) const {
    for (const auto& m : messages_) {
        if (m.find(needle) != std::string::npos) return true;
    }
    return false;
}

}  // namespace dsc::log
