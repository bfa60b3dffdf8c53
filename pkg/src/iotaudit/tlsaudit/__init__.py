from .protocols import (ProtocolInventory, FlowProtocolInput, detect_protocol_versions)
from .certs import (CertificateRecord, ExtractionResult, extract_certificates,
                    TlsFlowInput)
from .auditcerts import (AuditPolicy, CertificateFinding, Finding, audit_certificates,
                         load_audit_policy, order_chain)

__all__ = [
    "ProtocolInventory", "FlowProtocolInput", "detect_protocol_versions",
    "CertificateRecord", "ExtractionResult", "extract_certificates", "TlsFlowInput",
    "AuditPolicy", "CertificateFinding", "Finding", "audit_certificates",
    "load_audit_policy", "order_chain",
]
