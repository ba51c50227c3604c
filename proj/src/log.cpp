#include "statiocl/log.hpp"

#include <iostream>

namespace statiocl {

namespace {

WarningSink& sink() {
    static WarningSink s = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return s;
}

}  // namespace

void warn(const std::string& message) {
    if (sink()) sink()(message);
}

WarningSink set_warning_sink(WarningSink next) {
    WarningSink prev = std::move(sink());
    sink() = std::move(next);
    return prev;
}

}  // namespace statiocl
