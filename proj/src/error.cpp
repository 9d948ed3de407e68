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

#include "atlas/error.hpp"

namespace atlas {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::RootNotFound: return "root_not_found";
        case ErrorCode::ZeroFilesMatched: return "zero_files_matched";
        case ErrorCode::UnknownPath: return "unknown_path";
        case ErrorCode::ManifestOverCap: return "manifest_over_cap";
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::DotSyntax: return "dot_syntax";
        case ErrorCode::IllegalRelation: return "illegal_relation";
        case ErrorCode::DuplicateNode: return "duplicate_node";
        case ErrorCode::UndeclaredNode: return "undeclared_node";
        case ErrorCode::SelfLoop: return "self_loop";
        case ErrorCode::MalformedJson: return "malformed_json";
        case ErrorCode::MissingField: return "missing_field";
        case ErrorCode::GuideLinkage: return "guide_linkage";
        case ErrorCode::SchemaViolation: return "schema_violation";
        case ErrorCode::TemplateError: return "template_error";
        case ErrorCode::EmptyContext: return "empty_context";
        case ErrorCode::EmptyQuestion: return "empty_question";
        case ErrorCode::UnparseablePriorOutput: return "unparseable_prior_output";
        case ErrorCode::OverCap: return "over_cap";
        case ErrorCode::Configuration: return "configuration";
        case ErrorCode::ProviderRejected: return "provider_rejected";
        case ErrorCode::AuthFailed: return "auth_failed";
        case ErrorCode::RetriesExhausted: return "retries_exhausted";
        case ErrorCode::ScriptExhausted: return "script_exhausted";
        case ErrorCode::InvalidHandle: return "invalid_handle";
        case ErrorCode::ParseFailure: return "parse_failure";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::UnknownNode: return "unknown_node";
        case ErrorCode::GenerationInProgress: return "generation_in_progress";
        case ErrorCode::ArchiveTooLarge: return "archive_too_large";
        case ErrorCode::UploadPending: return "upload_pending";
    }
    return "unknown";
}

}  // namespace atlas
