#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace dsc::log {

using Handler = std::function<void(std::string_view)>;

// Warnings go to stderr unless a handler is installed. Returns the previous handler.
Handler set_warning_handler(Handler handler);

void warn(std::string_view message);

// Scoped capture, mostly for tests.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    Handler previous_;
};

}  // namespace dsc::log
