"""Create run catalog

Revision ID: 3f1c9a7e2b10
Revises: 
Create Date: 2026-10-19 10:12:41.118204

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '3f1c9a7e2b10'
down_revision: Union[str, None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    # ### commands auto generated by Alembic - please adjust! ###
    op.create_table('detection_runs',
    sa.Column('id', sa.String(length=36), nullable=False),
    sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=True),
    sa.Column('e_i', sa.Integer(), nullable=False),
    sa.Column('e_j', sa.Integer(), nullable=False),
    sa.Column('prefilter', sa.String(), nullable=True),
    sa.Column('params', sa.JSON(), nullable=True),
    sa.Column('block_tp', sa.Integer(), nullable=True),
    sa.Column('block_tn', sa.Integer(), nullable=True),
    sa.Column('block_fp', sa.Integer(), nullable=True),
    sa.Column('block_fn', sa.Integer(), nullable=True),
    sa.Column('file_tp', sa.Integer(), nullable=True),
    sa.Column('file_tn', sa.Integer(), nullable=True),
    sa.Column('file_fp', sa.Integer(), nullable=True),
    sa.Column('file_fn', sa.Integer(), nullable=True),
    sa.Column('suspicious_files', sa.Integer(), nullable=True),
    sa.Column('wall_seconds', sa.Float(), nullable=True),
    sa.Column('timings', sa.JSON(), nullable=True),
    sa.Column('report', sa.JSON(), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_detection_runs_id'), 'detection_runs', ['id'], unique=False)
    op.create_table('campaign_runs',
    sa.Column('id', sa.String(length=36), nullable=False),
    sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=True),
    sa.Column('epoch', sa.Integer(), nullable=False),
    sa.Column('pattern', sa.String(), nullable=False),
    sa.Column('mode', sa.String(), nullable=True),
    sa.Column('seed', sa.Integer(), nullable=True),
    sa.Column('encrypted_bytes', sa.Integer(), nullable=True),
    sa.Column('encrypted_blocks', sa.Integer(), nullable=True),
    sa.Column('positive_files', sa.Integer(), nullable=True),
    sa.Column('ground_truth', sa.JSON(), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_campaign_runs_id'), 'campaign_runs', ['id'], unique=False)
    # ### end Alembic commands ###


def downgrade() -> None:
    # ### commands auto generated by Alembic - please adjust! ###
    op.drop_index(op.f('ix_campaign_runs_id'), table_name='campaign_runs')
    op.drop_table('campaign_runs')
    op.drop_index(op.f('ix_detection_runs_id'), table_name='detection_runs')
    op.drop_table('detection_runs')
    # ### end Alembic commands ###
