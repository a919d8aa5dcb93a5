#pragma once

namespace tempro {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tempro
