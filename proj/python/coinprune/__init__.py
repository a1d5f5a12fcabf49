"""Python bindings for the CoinPrune desk-scale library."""

from ._core import (
    Block,
    ChunkedObject,
    CompressedTxOut,
    DecodeError,
    PulseParams,
    apply_snapshot,
    build_snapshot,
    classify_script,
    combined_tag,
    compress,
    decompress,
    encode_coinbase_tag,
    generate_chain,
    hash160,
    hash256,
    obfuscate,
    op_return_script,
    p2pk_script,
    p2pkh_script,
    p2sh_script,
    p2wpkh_script,
    p2wsh_script,
    push_sequence,
    read_block_file,
    reaffirmation_window,
    run_scenario,
    security_sweep,
    sha256,
    tally_window,
    toy_signature,
    utxo_stream,
    validate_spend,
    write_block_file,
)

__all__ = [name for name in dir() if not name.startswith("_")]
