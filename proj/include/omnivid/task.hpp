#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace omnivid {

// The five supported tasks, closed enumeration.
enum class TaskKind : uint8_t {
    T2V = 0,
    I2V = 1,
    FLF2V = 2,
    InContextGen = 3,
    InContextEdit = 4,
};

constexpr int kNumTasks = 5;

const char* task_name(TaskKind t);
std::optional<TaskKind> task_from_name(const std::string& s);

}  // namespace omnivid
