// Copyright 2026 The Atlas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace atlas {

// Every failure surfaced by the library carries one of these codes. The HTTP
// layer maps them onto status codes and the uniform {code, message, detail}
// error body, so the set is shared across modules.
enum class ErrorCode {
    // ingest
    RootNotFound,
    ZeroFilesMatched,
    UnknownPath,
    ManifestOverCap,
    InvalidArgument,
    Io,
    // graph model
    DotSyntax,
    IllegalRelation,
    DuplicateNode,
    UndeclaredNode,
    SelfLoop,
    MalformedJson,
    MissingField,
    GuideLinkage,
    SchemaViolation,
    // prompts
    TemplateError,
    EmptyContext,
    EmptyQuestion,
    UnparseablePriorOutput,
    // gateway
    OverCap,
    Configuration,
    ProviderRejected,
    AuthFailed,
    RetriesExhausted,
    ScriptExhausted,
    InvalidHandle,
    // refinement / service
    ParseFailure,
    NotFound,
    UnknownNode,
    GenerationInProgress,
    ArchiveTooLarge,
    UploadPending,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(message), code_(code), details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::vector<std::string> details_;
};

}  // namespace atlas
